//! Adaptive composite Simpson quadrature with a deterministic panel order.

use crate::{Error, Result};

/// Refinement beyond this many panels is reported as a failure.
pub const MAX_PANELS: usize = 1 << 20;

const INITIAL_PANELS: usize = 16;

/// `∫_a^b f` to relative tolerance `rel_tol`.
///
/// The interval is first split into 16 panels; the absolute target is
/// `rel_tol · ∫|f|` estimated on those panels, distributed by panel width.
/// Panels are refined depth-first, left to right, and summed in that order,
/// so the result does not depend on anything but `f`, `a`, `b`, `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("integration bounds"));
    }
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut panels = Vec::with_capacity(INITIAL_PANELS);
    let mut scale = 0.0;
    for i in 0..INITIAL_PANELS {
        let l = a + width * i as f64;
        let r = if i + 1 == INITIAL_PANELS { b } else { l + width };
        let m = 0.5 * (l + r);
        let (fl, fm, fr) = (f(l), f(m), f(r));
        if !(fl.is_finite() && fm.is_finite() && fr.is_finite()) {
            return Err(Error::NonFinite("integrand"));
        }
        scale += (r - l).abs() / 6.0 * (fl.abs() + 4.0 * fm.abs() + fr.abs());
        panels.push((l, m, r, fl, fm, fr));
    }
    let eps_total = rel_tol * scale;

    let mut total = 0.0;
    let mut count = INITIAL_PANELS;
    // Stack entries: (l, r, fl, fm, fr, eps). Pushed right-then-left so the
    // leftmost panel is always processed first.
    let mut stack = Vec::new();
    for &(l, _, r, fl, fm, fr) in panels.iter().rev() {
        stack.push((l, r, fl, fm, fr, eps_total / INITIAL_PANELS as f64));
    }
    while let Some((l, r, fl, fm, fr, eps)) = stack.pop() {
        let m = 0.5 * (l + r);
        let lm = 0.5 * (l + m);
        let rm = 0.5 * (m + r);
        let (flm, frm) = (f(lm), f(rm));
        if !(flm.is_finite() && frm.is_finite()) {
            return Err(Error::NonFinite("integrand"));
        }
        let h = r - l;
        let whole = h / 6.0 * (fl + 4.0 * fm + fr);
        let left = h / 12.0 * (fl + 4.0 * flm + fm);
        let right = h / 12.0 * (fm + 4.0 * frm + fr);
        let diff = left + right - whole;
        if diff.abs() <= 15.0 * eps || m <= l || m >= r {
            total += left + right + diff / 15.0;
        } else {
            count += 1;
            if count > MAX_PANELS {
                return Err(Error::QuadratureFailure(count));
            }
            stack.push((m, r, fm, frm, fr, 0.5 * eps));
            stack.push((l, m, fl, flm, fm, 0.5 * eps));
        }
    }
    Ok(total)
}
