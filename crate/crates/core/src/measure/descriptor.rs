use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fock::{
    apply_loss, apply_thermal, kerr_evolve, make_cat, make_coherent, make_snap_state,
    DensityMatrix, KerrEvolutionSpec, C64, DEFAULT_STEP,
};

/// Ideal pure-state preparation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Preparation {
    Coherent { re: f64, im: f64 },
    Cat { re: f64, im: f64, components: usize },
    Snap { re: f64, im: f64, thetas: Vec<f64> },
}

/// Noise or dynamics applied after preparation, in order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Channel {
    Loss { tau: f64 },
    Thermal { nbar: f64, tau: f64 },
    Kerr { t: f64, eta: f64 },
}

/// Recipe for a simulated state: a preparation followed by channels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateDescriptor {
    pub preparation: Preparation,
    #[serde(default)]
    pub channels: Vec<Channel>,
}

impl StateDescriptor {
    pub fn cat(alpha: f64, components: usize) -> Self {
        Self {
            preparation: Preparation::Cat {
                re: alpha,
                im: 0.0,
                components,
            },
            channels: Vec::new(),
        }
    }

    pub fn coherent(alpha: f64) -> Self {
        Self {
            preparation: Preparation::Coherent { re: alpha, im: 0.0 },
            channels: Vec::new(),
        }
    }

    pub fn snap(alpha: f64, thetas: Vec<f64>) -> Self {
        Self {
            preparation: Preparation::Snap {
                re: alpha,
                im: 0.0,
                thetas,
            },
            channels: Vec::new(),
        }
    }

    pub fn then(mut self, channel: Channel) -> Self {
        self.channels.push(channel);
        self
    }

    pub fn realize(&self, dim: usize) -> Result<DensityMatrix> {
        let psi = match &self.preparation {
            Preparation::Coherent { re, im } => make_coherent(C64::new(*re, *im), dim)?,
            Preparation::Cat { re, im, components } => make_cat(C64::new(*re, *im), *components, dim)?,
            Preparation::Snap { re, im, thetas } => make_snap_state(C64::new(*re, *im), thetas, dim)?,
        };
        let mut rho = psi.to_density();
        for ch in &self.channels {
            rho = match ch {
                Channel::Loss { tau } => apply_loss(&rho, *tau)?,
                Channel::Thermal { nbar, tau } => apply_thermal(&rho, *nbar, *tau)?,
                Channel::Kerr { t, eta } => {
                    if *t == 0.0 {
                        rho
                    } else {
                        let spec = KerrEvolutionSpec {
                            loss_rate: *eta,
                            snapshot_times: vec![0.0, *t],
                            integrator_step: DEFAULT_STEP,
                        };
                        kerr_evolve(&rho, &spec)?.pop().expect("snapshot")
                    }
                }
            };
        }
        Ok(rho)
    }
}

impl fmt::Display for StateDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.preparation {
            Preparation::Coherent { re, im } => write!(f, "coherent({re}{im:+}i)")?,
            Preparation::Cat { re, im, components } => write!(f, "cat{components}({re}{im:+}i)")?,
            Preparation::Snap { re, im, thetas } => {
                write!(f, "snap({re}{im:+}i;")?;
                for (i, t) in thetas.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{t}")?;
                }
                write!(f, ")")?;
            }
        }
        for ch in &self.channels {
            match ch {
                Channel::Loss { tau } => write!(f, "|loss({tau})")?,
                Channel::Thermal { nbar, tau } => write!(f, "|thermal({nbar},{tau})")?,
                Channel::Kerr { t, eta } => write!(f, "|kerr({t},{eta})")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fidelity, DEFAULT_DIM};

    #[test]
    fn display_is_canonical() {
        let d = StateDescriptor::cat(1.5, 2).then(Channel::Thermal { nbar: 0.1, tau: 0.1 });
        assert_eq!(d.to_string(), "cat2(1.5+0i)|thermal(0.1,0.1)");
        let s = StateDescriptor::snap(1.0, vec![0.5, 1.0]);
        assert_eq!(s.to_string(), "snap(1+0i;0.5,1)");
    }

    #[test]
    fn serde_round_trip() {
        let d = StateDescriptor::coherent(1.2).then(Channel::Kerr { t: 0.3, eta: 0.5 });
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(serde_json::from_str::<StateDescriptor>(&json).unwrap(), d);
    }

    #[test]
    fn kerr_channel_revives() {
        let d = StateDescriptor::coherent(1.5).then(Channel::Kerr { t: 1.0, eta: 0.0 });
        let rho = d.realize(DEFAULT_DIM).unwrap();
        let start = StateDescriptor::coherent(1.5).realize(DEFAULT_DIM).unwrap();
        assert!(fidelity(&rho, &start).unwrap() > 0.999);
    }
}
