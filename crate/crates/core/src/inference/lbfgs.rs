//! Limited-memory BFGS ascent with a strong-Wolfe line search.
//!
//! Internally the negated objective is minimised; everything reported back
//! is in terms of the original (maximised) objective.

use std::collections::VecDeque;

/// Value and gradient at a point, or `None` where the objective is not
/// defined (the line search then shortens the step).
pub trait Objective {
    fn evaluate(&self, x: &[f64]) -> Option<(f64, Vec<f64>)>;
}

impl<F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>> Objective for F {
    fn evaluate(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LbfgsOptions {
    pub max_iter: usize,
    pub memory: usize,
    pub grad_tol: f64,
    pub rel_tol: f64,
    /// Sufficient-decrease and curvature constants.
    pub c1: f64,
    pub c2: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            max_iter: 2000,
            memory: 10,
            grad_tol: 1e-5,
            rel_tol: 1e-9,
            c1: 1e-4,
            c2: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub reason: &'static str,
    /// `(iteration, value)` after every accepted step, starting at 0.
    pub trace: Vec<(usize, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(x: &[f64], alpha: f64, p: &[f64]) -> Vec<f64> {
    x.iter().zip(p).map(|(a, b)| a + alpha * b).collect()
}

struct Point {
    alpha: f64,
    f: f64,
    g: Vec<f64>,
    slope: f64,
}

/// Minimisation view of the objective along a ray.
struct Ray<'a, O: Objective + ?Sized> {
    obj: &'a O,
    x: &'a [f64],
    p: &'a [f64],
}

impl<O: Objective + ?Sized> Ray<'_, O> {
    fn at(&self, alpha: f64) -> Option<Point> {
        let (v, g) = self.obj.evaluate(&axpy(self.x, alpha, self.p))?;
        if !v.is_finite() || g.iter().any(|x| !x.is_finite()) {
            return None;
        }
        let g: Vec<f64> = g.into_iter().map(|x| -x).collect();
        let slope = dot(&g, self.p);
        Some(Point { alpha, f: -v, g, slope })
    }
}

fn interpolate(lo: &Point, hi_alpha: f64, hi_f: Option<f64>) -> f64 {
    let d = hi_alpha - lo.alpha;
    let guess = match hi_f {
        Some(fh) => {
            let denom = 2.0 * (fh - lo.f - lo.slope * d);
            if denom > 0.0 {
                lo.alpha - lo.slope * d * d / denom
            } else {
                f64::NAN
            }
        }
        None => f64::NAN,
    };
    let (a, b) = if d > 0.0 { (lo.alpha, hi_alpha) } else { (hi_alpha, lo.alpha) };
    let margin = 0.1 * (b - a);
    if guess.is_finite() && guess > a + margin && guess < b - margin {
        guess
    } else {
        0.5 * (a + b)
    }
}

fn zoom<O: Objective + ?Sized>(
    ray: &Ray<O>,
    f0: f64,
    slope0: f64,
    opts: &LbfgsOptions,
    mut lo: Point,
    mut hi_alpha: f64,
    mut hi_f: Option<f64>,
) -> Option<Point> {
    for _ in 0..40 {
        let a = interpolate(&lo, hi_alpha, hi_f);
        match ray.at(a) {
            None => {
                hi_alpha = a;
                hi_f = None;
            }
            Some(pt) => {
                if pt.f > f0 + opts.c1 * a * slope0 || pt.f >= lo.f {
                    hi_alpha = a;
                    hi_f = Some(pt.f);
                } else {
                    if pt.slope.abs() <= -opts.c2 * slope0 {
                        return Some(pt);
                    }
                    if pt.slope * (hi_alpha - lo.alpha) >= 0.0 {
                        hi_alpha = lo.alpha;
                        hi_f = Some(lo.f);
                    }
                    lo = pt;
                }
            }
        }
        if (hi_alpha - lo.alpha).abs() <= 1e-14 * lo.alpha.abs().max(1e-10) {
            break;
        }
    }
    // The low end always satisfies sufficient decrease; accept it if it moved.
    (lo.alpha > 0.0).then_some(lo)
}

fn line_search<O: Objective + ?Sized>(
    ray: &Ray<O>,
    start: &Point,
    alpha_init: f64,
    opts: &LbfgsOptions,
) -> Option<Point> {
    let (f0, slope0) = (start.f, start.slope);
    let mut prev = Point {
        alpha: 0.0,
        f: start.f,
        g: start.g.clone(),
        slope: start.slope,
    };
    let mut alpha = alpha_init;
    for i in 0..30 {
        let Some(pt) = ray.at(alpha) else {
            // Undefined region: bracket between the last good point and here.
            return zoom(ray, f0, slope0, opts, prev, alpha, None);
        };
        if pt.f > f0 + opts.c1 * alpha * slope0 || (i > 0 && pt.f >= prev.f) {
            return zoom(ray, f0, slope0, opts, prev, alpha, Some(pt.f));
        }
        if pt.slope.abs() <= -opts.c2 * slope0 {
            return Some(pt);
        }
        if pt.slope >= 0.0 {
            let (ha, hf) = (prev.alpha, prev.f);
            return zoom(ray, f0, slope0, opts, pt, ha, Some(hf));
        }
        prev = pt;
        alpha *= 2.0;
    }
    (prev.alpha > 0.0).then_some(prev)
}

/// Two-loop recursion: `−H g` from the stored curvature pairs.
fn direction(g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Maximises `obj` from `x0`. Returns `None` when the objective is undefined
/// at the starting point.
pub fn maximize<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &LbfgsOptions) -> Option<LbfgsOutcome> {
    let zero = vec![0.0; x0.len()];
    let origin = Ray { obj, x: x0, p: &zero };
    let mut cur = origin.at(0.0)?;
    let mut x = x0.to_vec();
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let mut trace = vec![(0, -cur.f)];
    let mut iterations = 0;
    let (converged, reason) = loop {
        let gnorm = norm(&cur.g);
        if gnorm < opts.grad_tol {
            break (true, "gradient norm below tolerance");
        }
        if iterations >= opts.max_iter {
            break (false, "iteration cap reached");
        }
        let mut p = direction(&cur.g, &pairs);
        if dot(&p, &cur.g) >= 0.0 {
            pairs.clear();
            p = cur.g.iter().map(|v| -v).collect();
        }
        let alpha_init = if pairs.is_empty() { (1.0 / norm(&p)).min(1.0) } else { 1.0 };
        let ray = Ray { obj, x: &x, p: &p };
        let start = Point {
            alpha: 0.0,
            f: cur.f,
            g: cur.g.clone(),
            slope: dot(&cur.g, &p),
        };
        let Some(next) = line_search(&ray, &start, alpha_init, opts) else {
            if pairs.is_empty() {
                break (false, "line search failed along steepest ascent");
            }
            pairs.clear();
            continue;
        };
        let x_new = axpy(&x, next.alpha, &p);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm(&s) * norm(&y) {
            if pairs.len() == opts.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let change = (next.f - cur.f).abs() / cur.f.abs().max(1.0);
        iterations += 1;
        x = x_new;
        cur = next;
        trace.push((iterations, -cur.f));
        if change < opts.rel_tol {
            break (true, "relative change below tolerance");
        }
    };
    Some(LbfgsOutcome {
        x,
        value: -cur.f,
        gradient_norm: norm(&cur.g),
        iterations,
        converged,
        reason,
        trace,
    })
}
