//! Lindblad dynamics with a Fock-diagonal Hamiltonian.
//!
//! The master equation
//!
//! ```text
//! ρ̇ = −i[H, ρ] + γ↓ D(a)(ρ) + γ↑ D(a†)(ρ),   D(L)ρ = LρL† − ½{L†L, ρ}
//! ```
//!
//! is integrated with fixed-step RK4 in the interaction picture of `H`.
//! Because `H` is diagonal the frame change is an exact phase per matrix
//! element, so stiff Kerr phases never enter the integrator. Jump operators
//! are the truncated matrices, which keeps the generator exactly
//! trace-preserving on the truncated space.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::{DensityMatrix, C64};
use crate::error::{Error, Result};

/// Default RK4 step.
pub const DEFAULT_STEP: f64 = 1e-3;

const TRACE_DRIFT_LIMIT: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct MasterEquation {
    /// Diagonal of the Hamiltonian in the Fock basis.
    pub energies: Vec<f64>,
    /// Rate of the D(a) dissipator.
    pub loss_rate: f64,
    /// Rate of the D(a†) dissipator.
    pub gain_rate: f64,
}

impl MasterEquation {
    pub fn pure_loss(dim: usize, rate: f64) -> Self {
        Self {
            energies: vec![0.0; dim],
            loss_rate: rate,
            gain_rate: 0.0,
        }
    }

    pub fn thermal(dim: usize, nbar: f64) -> Self {
        Self {
            energies: vec![0.0; dim],
            loss_rate: nbar + 1.0,
            gain_rate: nbar,
        }
    }

    /// H = π a†²a², i.e. Eₙ = π n(n−1), plus loss at rate `eta`.
    pub fn kerr(dim: usize, eta: f64) -> Self {
        Self {
            energies: kerr_energies(dim),
            loss_rate: eta,
            gain_rate: 0.0,
        }
    }

    fn dim(&self) -> usize {
        self.energies.len()
    }

    fn validate(&self) -> Result<()> {
        if self.loss_rate < 0.0 || self.gain_rate < 0.0 {
            return Err(Error::invalid("dissipation rates must be non-negative"));
        }
        if self.energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::invalid("Hamiltonian has non-finite energies"));
        }
        Ok(())
    }

    /// Interaction-picture generator at time `t`.
    fn rhs(&self, t: f64, r: &DMatrix<C64>, out: &mut DMatrix<C64>) {
        let n = self.dim();
        // u_m = exp(−i (E_{m+1} − E_m) t)
        let u: Vec<C64> = (0..n.saturating_sub(1))
            .map(|m| C64::from_polar(1.0, -(self.energies[m + 1] - self.energies[m]) * t))
            .collect();
        let (gl, gg) = (self.loss_rate, self.gain_rate);
        for col in 0..n {
            for row in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                if gl != 0.0 {
                    if row + 1 < n && col + 1 < n {
                        let amp = (((row + 1) * (col + 1)) as f64).sqrt();
                        acc += u[row] * u[col].conj() * r[(row + 1, col + 1)] * amp * gl;
                    }
                    acc -= r[(row, col)] * (0.5 * gl * (row + col) as f64);
                }
                if gg != 0.0 {
                    if row >= 1 && col >= 1 {
                        let amp = ((row * col) as f64).sqrt();
                        acc += u[row - 1].conj() * u[col - 1] * r[(row - 1, col - 1)] * amp * gg;
                    }
                    let g = |m: usize| if m + 1 < n { (m + 1) as f64 } else { 0.0 };
                    acc -= r[(row, col)] * (0.5 * gg * (g(row) + g(col)));
                }
                out[(row, col)] = acc;
            }
        }
    }

    fn to_interaction(&self, rho: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        let e = &self.energies;
        DMatrix::from_fn(rho.nrows(), rho.ncols(), |m, n| {
            rho[(m, n)] * C64::from_polar(1.0, (e[m] - e[n]) * t)
        })
    }

    fn to_schrodinger(&self, rho: &DMatrix<C64>, t: f64) -> DMatrix<C64> {
        let e = &self.energies;
        DMatrix::from_fn(rho.nrows(), rho.ncols(), |m, n| {
            rho[(m, n)] * C64::from_polar(1.0, -(e[m] - e[n]) * t)
        })
    }

    /// Integrates from `times[0]` (the time at which `initial` is given) and
    /// returns the state at every entry of `times`.
    pub fn evolve(
        &self,
        initial: &DensityMatrix,
        times: &[f64],
        step: f64,
    ) -> Result<Vec<DensityMatrix>> {
        self.validate()?;
        if initial.dim() != self.dim() {
            return Err(Error::invalid(format!(
                "state dim {} does not match generator dim {}",
                initial.dim(),
                self.dim()
            )));
        }
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid("integrator step must be positive"));
        }
        let Some(&t0) = times.first() else {
            return Ok(Vec::new());
        };
        if times.windows(2).any(|w| !(w[1] > w[0])) || !(t0 >= 0.0) {
            return Err(Error::invalid("snapshot times must be non-negative and strictly increasing"));
        }

        let n = self.dim();
        let trace0 = initial.trace().re;
        let mut y = self.to_interaction(initial.entries(), t0);
        let mut out = Vec::with_capacity(times.len());
        out.push(initial.clone());

        let mut k1 = DMatrix::zeros(n, n);
        let mut k2 = DMatrix::zeros(n, n);
        let mut k3 = DMatrix::zeros(n, n);
        let mut k4 = DMatrix::zeros(n, n);
        let mut t = t0;
        for &target in &times[1..] {
            let span = target - t;
            let steps = ((span / step) - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                self.rhs(t, &y, &mut k1);
                let y2 = &y + &k1 * C64::new(h / 2.0, 0.0);
                self.rhs(t + h / 2.0, &y2, &mut k2);
                let y3 = &y + &k2 * C64::new(h / 2.0, 0.0);
                self.rhs(t + h / 2.0, &y3, &mut k3);
                let y4 = &y + &k3 * C64::new(h, 0.0);
                self.rhs(t + h, &y4, &mut k4);
                let incr = (&k1 + &k2 * C64::new(2.0, 0.0) + &k3 * C64::new(2.0, 0.0) + &k4)
                    * C64::new(h / 6.0, 0.0);
                y += incr;
                t += h;
            }
            t = target;
            let tr = y.trace();
            let drift = (tr.re - trace0).abs().max(tr.im.abs());
            if !drift.is_finite() || drift > TRACE_DRIFT_LIMIT {
                return Err(Error::numerical(format!(
                    "master equation integration diverged at t = {target}: trace drift {drift:.3e}; \
                     retry with a step smaller than {step:e}"
                )));
            }
            let mut rho = DensityMatrix::from_matrix_unchecked(self.to_schrodinger(&y, t));
            rho.symmetrize();
            out.push(rho);
        }
        Ok(out)
    }
}

pub(crate) fn kerr_energies(dim: usize) -> Vec<f64> {
    (0..dim).map(|n| PI * (n * n.saturating_sub(1)) as f64).collect()
}

fn evolve_to(eq: &MasterEquation, state: &DensityMatrix, time: f64) -> Result<DensityMatrix> {
    if !(time >= 0.0 && time.is_finite()) {
        return Err(Error::invalid(format!("evolution time {time} must be >= 0")));
    }
    if time == 0.0 {
        return Ok(state.clone());
    }
    let mut snaps = eq.evolve(state, &[0.0, time], DEFAULT_STEP)?;
    Ok(snaps.pop().expect("two snapshots"))
}

/// Pure-loss channel: evolves ρ̇ = D(a)ρ for time `loss_time` (transmissivity e^{−τ}).
pub fn apply_loss(state: &DensityMatrix, loss_time: f64) -> Result<DensityMatrix> {
    evolve_to(&MasterEquation::pure_loss(state.dim(), 1.0), state, loss_time)
}

/// Thermal channel: evolves under (n̄+1)D(a) + n̄D(a†) for time `time`.
pub fn apply_thermal(state: &DensityMatrix, nbar: f64, time: f64) -> Result<DensityMatrix> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::invalid(format!("thermal occupancy {nbar} must be >= 0")));
    }
    let out = evolve_to(&MasterEquation::thermal(state.dim(), nbar), state, time)?;
    out.check_truncation()?;
    Ok(out)
}

/// Kerr evolution schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KerrEvolutionSpec {
    pub loss_rate: f64,
    pub snapshot_times: Vec<f64>,
    pub integrator_step: f64,
}

impl KerrEvolutionSpec {
    /// Snapshots tᵢ = i/10, i = 0..=10.
    pub fn tenths(loss_rate: f64) -> Self {
        Self {
            loss_rate,
            snapshot_times: (0..=10).map(|i| i as f64 / 10.0).collect(),
            integrator_step: DEFAULT_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.loss_rate >= 0.0 && self.loss_rate.is_finite()) {
            return Err(Error::invalid("Kerr loss rate must be >= 0"));
        }
        if !(self.integrator_step > 0.0) {
            return Err(Error::invalid("integrator step must be positive"));
        }
        match self.snapshot_times.first() {
            Some(&t) if t == 0.0 => {}
            _ => return Err(Error::invalid("snapshot times must start at 0")),
        }
        if self.snapshot_times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("snapshot times must be strictly increasing"));
        }
        Ok(())
    }
}

/// Evolves under H = π a†²a² with optional loss, returning every snapshot.
///
/// Without loss the propagator is the exact phase exp(−iπ n(n−1) t).
pub fn kerr_evolve(initial: &DensityMatrix, spec: &KerrEvolutionSpec) -> Result<Vec<DensityMatrix>> {
    spec.validate()?;
    let eq = MasterEquation::kerr(initial.dim(), spec.loss_rate);
    if spec.loss_rate == 0.0 {
        let rho = initial.entries();
        return Ok(spec
            .snapshot_times
            .iter()
            .map(|&t| {
                let mut out = DensityMatrix::from_matrix_unchecked(eq.to_schrodinger(rho, t));
                out.symmetrize();
                out
            })
            .collect());
    }
    eq.evolve(initial, &spec.snapshot_times, spec.integrator_step)
}
