use super::dynamics::{MasterEquation, DEFAULT_STEP};
use super::{fidelity, DensityMatrix};
use crate::error::{Error, Result};

const SCAN_STEP: f64 = 0.02;
const MAX_LOSS_TIME: f64 = 6.0;

fn advance(state: &DensityMatrix, dt: f64) -> Result<DensityMatrix> {
    if dt == 0.0 {
        return Ok(state.clone());
    }
    let eq = MasterEquation::pure_loss(state.dim(), 1.0);
    Ok(eq.evolve(state, &[0.0, dt], DEFAULT_STEP)?.pop().expect("snapshot"))
}

/// Finds the pure-loss time τ with F(apply_loss(ideal, τ), reference) = target.
///
/// The search runs on the decreasing branch: it scans τ upward past the
/// fidelity maximum and bisects the first bracket that crosses `target`.
pub fn calibrate_loss_for_fidelity(
    reference: &DensityMatrix,
    ideal: &DensityMatrix,
    target_fidelity: f64,
) -> Result<f64> {
    if !(target_fidelity > 0.0 && target_fidelity <= 1.0) {
        return Err(Error::invalid(format!(
            "target fidelity {target_fidelity} outside (0, 1]"
        )));
    }
    let f = |s: &DensityMatrix| fidelity(s, reference);

    let mut tau = 0.0;
    let mut state = ideal.clone();
    let mut value = f(&state)?;
    let (mut f_min, mut f_max) = (value, value);
    let mut peak_tau = 0.0;

    loop {
        if value >= target_fidelity - 1e-9 && (f_max - target_fidelity).abs() <= 1e-9 {
            // the peak itself hits the target (e.g. target = 1, reference = ideal)
            return Ok(peak_tau);
        }
        let next_tau = tau + SCAN_STEP;
        if next_tau > MAX_LOSS_TIME {
            return Err(Error::invalid(format!(
                "target fidelity {target_fidelity} not achievable; fidelity ranges over \
                 [{f_min:.6}, {f_max:.6}] for loss times in [0, {MAX_LOSS_TIME}]"
            )));
        }
        let next_state = advance(&state, SCAN_STEP)?;
        let next_value = f(&next_state)?;
        f_min = f_min.min(next_value);
        if next_value > f_max {
            f_max = next_value;
            peak_tau = next_tau;
        }
        let descending = next_value <= value;
        if descending && value >= target_fidelity && next_value < target_fidelity {
            return bisect(state, tau, value, next_tau, target_fidelity, &f);
        }
        tau = next_tau;
        state = next_state;
        value = next_value;
    }
}

fn bisect(
    lo_state: DensityMatrix,
    lo: f64,
    lo_value: f64,
    hi: f64,
    target: f64,
    f: &dyn Fn(&DensityMatrix) -> Result<f64>,
) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let mut a_state = lo_state;
    let mut a_value = lo_value;
    for _ in 0..60 {
        if (a_value - target).abs() < 1e-7 || b - a < 1e-12 {
            break;
        }
        let mid = 0.5 * (a + b);
        let mid_state = advance(&a_state, mid - a)?;
        let mid_value = f(&mid_state)?;
        if mid_value >= target {
            a = mid;
            a_state = mid_state;
            a_value = mid_value;
        } else {
            b = mid;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_loss, make_cat, C64, DEFAULT_DIM};

    fn cat(alpha: f64) -> DensityMatrix {
        make_cat(C64::new(alpha, 0.0), 2, DEFAULT_DIM).unwrap().to_density()
    }

    #[test]
    fn unit_target_gives_zero_time() {
        let ideal = cat(1.5);
        let tau = calibrate_loss_for_fidelity(&ideal, &ideal, 1.0).unwrap();
        assert!(tau.abs() < 1e-6);
    }

    #[test]
    fn hits_targets_within_tolerance() {
        let ideal = cat(1.5);
        for target in [0.99, 0.90, 0.84] {
            let tau = calibrate_loss_for_fidelity(&ideal, &ideal, target).unwrap();
            let got = fidelity(&apply_loss(&ideal, tau).unwrap(), &ideal).unwrap();
            assert!((got - target).abs() < 1e-3, "target {target}: got {got}");
        }
    }

    #[test]
    fn degrades_past_a_lossy_reference() {
        let ideal = cat(1.5);
        let t_ref = calibrate_loss_for_fidelity(&ideal, &ideal, 0.99).unwrap();
        let reference = apply_loss(&ideal, t_ref).unwrap();
        let tau = calibrate_loss_for_fidelity(&reference, &ideal, 0.9).unwrap();
        assert!(tau > t_ref);
        let got = fidelity(&apply_loss(&ideal, tau).unwrap(), &reference).unwrap();
        assert!((got - 0.9).abs() < 1e-3);
    }

    #[test]
    fn rejects_unreachable_targets() {
        let ideal = cat(1.5);
        let other = cat(1.0);
        assert!(calibrate_loss_for_fidelity(&ideal, &ideal, 1.5).is_err());
        assert!(calibrate_loss_for_fidelity(&other, &ideal, 0.9999).is_err());
    }

    #[test]
    fn fidelity_non_increasing_in_loss() {
        let ideal = cat(1.8);
        let mut prev = 1.0 + 1e-12;
        for i in 0..15 {
            let tau = 0.05 * i as f64;
            let f = fidelity(&apply_loss(&ideal, tau).unwrap(), &ideal).unwrap();
            assert!(f <= prev + 1e-12, "tau {tau}");
            prev = f;
        }
    }
}
