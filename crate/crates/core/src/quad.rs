//! Adaptive Simpson quadrature with an evaluation cap.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    /// Accumulated Richardson error estimate.
    pub error: f64,
    pub evaluations: usize,
}

/// Integrates a fallible integrand over `[a, b]` to absolute tolerance
/// `tol`. When `max_evals` is reached the remaining panels are accepted
/// unrefined and their tolerance share is added to the error.
pub fn adaptive_simpson<E>(
    f: impl Fn(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    tol: f64,
    max_evals: usize,
) -> Result<Quadrature, E> {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a)?, f(m)?, f(b)?);
    let mut state = State { evals: 3, error: 0.0, max_evals };
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let value = state.refine(&f, [a, b], [fa, fm, fb], whole, tol, 0)?;
    Ok(Quadrature { value, error: state.error, evaluations: state.evals })
}

struct State {
    evals: usize,
    error: f64,
    max_evals: usize,
}

impl State {
    fn refine<E>(
        &mut self,
        f: &impl Fn(f64) -> Result<f64, E>,
        [a, b]: [f64; 2],
        [fa, fm, fb]: [f64; 3],
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> Result<f64, E> {
        if self.evals + 2 > self.max_evals || depth > 50 {
            self.error += tol;
            return Ok(whole);
        }
        let m = 0.5 * (a + b);
        let (flm, frm) = (f(0.5 * (a + m))?, f(0.5 * (m + b))?);
        self.evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let diff = left + right - whole;
        if diff.abs() <= 15.0 * tol {
            self.error += diff.abs() / 15.0;
            return Ok(left + right + diff / 15.0);
        }
        Ok(self.refine(f, [a, m], [fa, flm, fm], left, tol / 2.0, depth + 1)?
            + self.refine(f, [m, b], [fm, frm, fb], right, tol / 2.0, depth + 1)?)
    }
}
