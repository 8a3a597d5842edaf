//! Labelled collections of data images.
//!
//! Image `r` of state `s` uses the seed `derive_seed(master, [s, r])`; when
//! the family carries affine distortions, the parameters are drawn from
//! `derive_seed(image_seed, [AFFINE])`. The last ⌈K/5⌉ repetitions of every
//! state form the validation split.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::affine::{affine_sample, AffineParams, DEFAULT_EVAL_BOUND};
use super::seeds::{derive_seed, rng_from, stream};
use super::{DataImage, GridSpec, StateDescriptor, WignerGrid};
use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

/// How images are measured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageConfig {
    pub grid: GridSpec,
    pub fraction: f64,
    pub shots: u32,
}

/// The fiducial states of a dataset plus optional per-image distortions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateFamily {
    pub states: Vec<StateDescriptor>,
    /// Random affine map per image, evaluated within this coordinate bound.
    #[serde(default)]
    pub affine_bound: Option<f64>,
}

impl StateFamily {
    pub fn new(states: Vec<StateDescriptor>) -> Self {
        Self {
            states,
            affine_bound: None,
        }
    }

    pub fn with_affine(mut self) -> Self {
        self.affine_bound = Some(DEFAULT_EVAL_BOUND);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    pub states: Vec<StateDescriptor>,
    /// `images[state][repetition]`
    pub images: Vec<Vec<DataImage>>,
    pub split: Vec<Vec<Split>>,
    pub k: usize,
}

/// Validation images per state: ⌈K/5⌉.
pub fn validation_count(k: usize) -> usize {
    k.div_ceil(5)
}

impl LabeledDataset {
    fn select(&self, which: Split) -> Vec<Vec<&DataImage>> {
        self.images
            .iter()
            .zip(&self.split)
            .map(|(imgs, split)| {
                imgs.iter()
                    .zip(split)
                    .filter_map(|(img, s)| (*s == which).then_some(img))
                    .collect()
            })
            .collect()
    }

    /// Training images grouped by state.
    pub fn train_groups(&self) -> Vec<Vec<&DataImage>> {
        self.select(Split::Train)
    }

    /// Validation images grouped by state.
    pub fn validation_groups(&self) -> Vec<Vec<&DataImage>> {
        self.select(Split::Validation)
    }

    pub fn image_side(&self) -> Option<usize> {
        self.images.first()?.first().map(|i| i.side())
    }

    /// Writes `manifest.json` plus one file per image under `dir`.
    pub fn save(&self, dir: &Path) -> Result<PathBuf> {
        let img_dir = dir.join("images");
        std::fs::create_dir_all(&img_dir).map_err(|e| Error::io(&img_dir, e))?;
        let mut entries = Vec::new();
        for (s, imgs) in self.images.iter().enumerate() {
            for (r, img) in imgs.iter().enumerate() {
                let rel = format!("images/s{s:04}_r{r:04}.txt");
                img.save(&dir.join(&rel))?;
                entries.push(ManifestImage {
                    state: s,
                    repetition: r,
                    split: self.split[s][r],
                    path: rel,
                });
            }
        }
        let manifest = Manifest {
            format_version: DATASET_FORMAT_VERSION,
            k: self.k,
            states: self.states.clone(),
            images: entries,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn load(manifest_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(manifest_path).map_err(|e| Error::io(manifest_path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)
            .map_err(|e| Error::parse(manifest_path.display().to_string(), e.to_string()))?;
        if manifest.format_version != DATASET_FORMAT_VERSION {
            return Err(Error::parse(
                manifest_path.display().to_string(),
                format!("unsupported dataset format {}", manifest.format_version),
            ));
        }
        let base = manifest_path.parent().unwrap_or(Path::new("."));
        let n = manifest.states.len();
        let mut images: Vec<Vec<DataImage>> = vec![Vec::new(); n];
        let mut split: Vec<Vec<Split>> = vec![Vec::new(); n];
        for entry in &manifest.images {
            if entry.state >= n || entry.repetition != images[entry.state].len() {
                return Err(Error::parse(
                    manifest_path.display().to_string(),
                    format!("image entry {} out of order", entry.path),
                ));
            }
            images[entry.state].push(DataImage::load(&base.join(&entry.path))?);
            split[entry.state].push(entry.split);
        }
        Ok(Self {
            states: manifest.states,
            images,
            split,
            k: manifest.k,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    k: usize,
    states: Vec<StateDescriptor>,
    images: Vec<ManifestImage>,
}

#[derive(Serialize, Deserialize)]
struct ManifestImage {
    state: usize,
    repetition: usize,
    split: Split,
    path: String,
}

/// Simulates K images of every state in `family`.
pub fn build_dataset(
    family: &StateFamily,
    k: usize,
    config: &ImageConfig,
    master_seed: u64,
    dim: usize,
) -> Result<LabeledDataset> {
    if k < 2 {
        return Err(Error::invalid(format!(
            "K = {k}: triplet training needs at least 2 images per state"
        )));
    }
    if family.states.len() < 2 {
        return Err(Error::invalid("a dataset needs at least 2 distinct states"));
    }
    for (i, a) in family.states.iter().enumerate() {
        if family.states[..i].contains(a) {
            return Err(Error::invalid(format!("state {a} listed twice")));
        }
    }
    config.grid.validate()?;
    config.grid.present_count(config.fraction)?;

    let per_state: Vec<Result<Vec<DataImage>>> = family
        .states
        .par_iter()
        .enumerate()
        .map(|(s, desc)| {
            let rho = desc.realize(dim)?;
            rho.check_truncation()?;
            let label = desc.to_string();
            let cached = family
                .affine_bound
                .is_none()
                .then(|| WignerGrid::new(&rho, &config.grid, label.clone()));
            (0..k)
                .map(|r| {
                    let seed = derive_seed(master_seed, &[s as u64, r as u64]);
                    match (&cached, family.affine_bound) {
                        (Some(grid), _) => grid.sample(config.fraction, config.shots, seed),
                        (None, bound) => {
                            let params =
                                AffineParams::sample(&mut rng_from(derive_seed(seed, &[stream::AFFINE])));
                            let mut img = affine_sample(
                                &rho,
                                &params,
                                &config.grid,
                                config.fraction,
                                config.shots,
                                seed,
                                bound.unwrap_or(DEFAULT_EVAL_BOUND),
                            )?;
                            img.descriptor = label.clone();
                            Ok(img)
                        }
                    }
                })
                .collect()
        })
        .collect();
    let images = per_state.into_iter().collect::<Result<Vec<_>>>()?;
    let n_val = validation_count(k);
    let split = vec![
        (0..k)
            .map(|r| if r < k - n_val { Split::Train } else { Split::Validation })
            .collect::<Vec<_>>();
        family.states.len()
    ];
    Ok(LabeledDataset {
        states: family.states.clone(),
        images,
        split,
        k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::DEFAULT_DIM;

    fn cat_family() -> StateFamily {
        StateFamily::new((0..=10).map(|i| StateDescriptor::cat(1.0 + 0.1 * i as f64, 2)).collect())
    }

    fn config() -> ImageConfig {
        ImageConfig {
            grid: GridSpec::new(16, 3.0).unwrap(),
            fraction: 0.75,
            shots: 300,
        }
    }

    #[test]
    fn split_counts() {
        assert_eq!(validation_count(20), 4);
        assert_eq!(validation_count(2), 1);
        let ds = build_dataset(&cat_family(), 20, &config(), 1, DEFAULT_DIM).unwrap();
        assert_eq!(ds.images.len(), 11);
        for g in ds.train_groups() {
            assert_eq!(g.len(), 16);
        }
        for g in ds.validation_groups() {
            assert_eq!(g.len(), 4);
        }
        let small = build_dataset(&cat_family(), 2, &config(), 1, DEFAULT_DIM).unwrap();
        assert!(small.train_groups().iter().all(|g| g.len() == 1));
        assert!(small.validation_groups().iter().all(|g| g.len() == 1));
    }

    #[test]
    fn rejects_small_k_and_single_state() {
        assert!(build_dataset(&cat_family(), 1, &config(), 1, DEFAULT_DIM).is_err());
        let single = StateFamily::new(vec![StateDescriptor::cat(1.0, 2)]);
        assert!(build_dataset(&single, 4, &config(), 1, DEFAULT_DIM).is_err());
    }

    #[test]
    fn images_share_descriptor_not_seed() {
        let ds = build_dataset(&cat_family(), 4, &config(), 3, DEFAULT_DIM).unwrap();
        let imgs = &ds.images[2];
        assert!(imgs.iter().all(|i| i.descriptor == "cat2(1.2+0i)"));
        let mut seeds: Vec<u64> = imgs.iter().map(|i| i.seed).collect();
        seeds.dedup();
        assert_eq!(seeds.len(), 4);
    }

    #[test]
    fn files_are_byte_identical_and_round_trip() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let ds = build_dataset(&cat_family(), 3, &config(), 8, DEFAULT_DIM).unwrap();
        let again = build_dataset(&cat_family(), 3, &config(), 8, DEFAULT_DIM).unwrap();
        let ma = ds.save(a.path()).unwrap();
        let mb = again.save(b.path()).unwrap();
        assert_eq!(std::fs::read(&ma).unwrap(), std::fs::read(&mb).unwrap());
        for s in 0..11 {
            for r in 0..3 {
                let rel = format!("images/s{s:04}_r{r:04}.txt");
                assert_eq!(
                    std::fs::read(a.path().join(&rel)).unwrap(),
                    std::fs::read(b.path().join(&rel)).unwrap()
                );
            }
        }
        assert_eq!(LabeledDataset::load(&ma).unwrap(), ds);
    }

    #[test]
    fn affine_family_records_parameters() {
        let fam = StateFamily::new(vec![
            StateDescriptor::snap(1.0, vec![1.0, 2.0]),
            StateDescriptor::snap(1.0, vec![2.0, 1.0]),
        ])
        .with_affine();
        let ds = build_dataset(&fam, 2, &config(), 4, DEFAULT_DIM).unwrap();
        for img in ds.images.iter().flatten() {
            img.affine.unwrap().validate().unwrap();
        }
        assert_ne!(ds.images[0][0].affine, ds.images[0][1].affine);
    }
}
