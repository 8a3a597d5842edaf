//! Training stage with an on-disk cache keyed by everything that
//! determines the trained parameters.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::embednet::{train_groups, NetworkLayout, NetworkParams, TrainConfig, TrainLog};
use crate::error::{Error, Result};
use crate::measure::{build_dataset, ImageConfig, LabeledDataset, StateFamily};
use crate::verify::{calibrate_threshold, Threshold};

/// Bumped whenever training semantics change, so stale entries miss.
const CACHE_FORMAT_VERSION: u32 = 1;

/// Dataset recipe, architecture and optimizer settings of one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRecipe {
    pub family: StateFamily,
    pub k: usize,
    pub image: ImageConfig,
    pub data_seed: u64,
    pub dim: usize,
    pub layout: NetworkLayout,
    pub training: TrainConfig,
}

impl ModelRecipe {
    /// SHA-256 over the JSON form of the recipe.
    pub fn key(&self) -> String {
        let json = serde_json::to_string(&(CACHE_FORMAT_VERSION, self)).expect("recipe serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn dataset(&self) -> Result<LabeledDataset> {
        build_dataset(&self.family, self.k, &self.image, self.data_seed, self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams,
    /// Equal-error-rate threshold on the validation split.
    pub threshold: Threshold,
    pub log: TrainLog,
}

#[derive(Serialize, Deserialize)]
struct CacheMeta {
    threshold: Threshold,
    log: TrainLog,
}

/// Directory of trained models, one subdirectory per recipe key.
#[derive(Clone, Debug)]
pub struct ModelCache {
    dir: PathBuf,
}

impl ModelCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.dir.join(key)
    }

    pub fn get(&self, key: &str) -> Result<Option<TrainedModel>> {
        let dir = self.entry(key);
        let (model, meta) = (dir.join("model.json"), dir.join("meta.json"));
        if !model.exists() || !meta.exists() {
            return Ok(None);
        }
        let params = NetworkParams::load(&model)?;
        let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let meta: CacheMeta =
            serde_json::from_str(&text).map_err(|e| Error::parse(meta.display().to_string(), e.to_string()))?;
        Ok(Some(TrainedModel {
            params,
            threshold: meta.threshold,
            log: meta.log,
        }))
    }

    /// Writes into a scratch directory first and renames it into place, so
    /// an interrupted run never leaves a half-written entry.
    pub fn put(&self, key: &str, model: &TrainedModel) -> Result<()> {
        let target = self.entry(key);
        let scratch = self.dir.join(format!(".{key}.partial"));
        std::fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
        model.params.save(&scratch.join("model.json"))?;
        let meta = CacheMeta {
            threshold: model.threshold,
            log: model.log.clone(),
        };
        let meta_path = scratch.join("meta.json");
        std::fs::write(&meta_path, serde_json::to_string(&meta).expect("meta serializes"))
            .map_err(|e| Error::io(&meta_path, e))?;
        if target.exists() {
            std::fs::remove_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        }
        std::fs::rename(&scratch, &target).map_err(|e| Error::io(&target, e))
    }
}

/// Loads the model for `recipe` from the cache, or builds the dataset,
/// trains and calibrates. Failures name `stage` and the relevant seed.
pub fn obtain_model(recipe: &ModelRecipe, cache: Option<&ModelCache>, stage: &str) -> Result<TrainedModel> {
    let key = recipe.key();
    if let Some(cache) = cache {
        if let Some(m) = cache.get(&key).map_err(|e| e.in_stage(format!("{stage}/cache"), recipe.training.seed))? {
            log::info!("{stage}: cached model {}", &key[..12]);
            return Ok(m);
        }
    }
    let dataset = recipe
        .dataset()
        .map_err(|e| e.in_stage(format!("{stage}/data"), recipe.data_seed))?;
    let model = train_on(&dataset, recipe, stage)?;
    if let Some(cache) = cache {
        cache
            .put(&key, &model)
            .map_err(|e| e.in_stage(format!("{stage}/cache"), recipe.training.seed))?;
    }
    Ok(model)
}

/// Trains on the training split and calibrates on the validation split.
pub fn train_on(dataset: &LabeledDataset, recipe: &ModelRecipe, stage: &str) -> Result<TrainedModel> {
    let seed = recipe.training.seed;
    let init = NetworkParams::init(recipe.layout.clone(), seed).map_err(|e| e.in_stage(format!("{stage}/init"), seed))?;
    let every = (recipe.training.max_epochs / 10).max(1);
    let (params, log) = train_groups(init, &dataset.train_groups(), &recipe.training, |r| {
        if r.epoch % every == 0 {
            log::info!("{stage}: epoch {} loss {:.4} ({:.0} s)", r.epoch, r.loss, r.wall_seconds);
        }
    })
    .map_err(|e| e.in_stage(format!("{stage}/train"), seed))?;
    let threshold = calibrate_threshold(&params, &dataset.validation_groups())
        .map_err(|e| e.in_stage(format!("{stage}/calibrate"), seed))?;
    log::info!(
        "{stage}: threshold {:.4} (FRR {:.3}, FAR {:.3})",
        threshold.value,
        threshold.frr,
        threshold.far
    );
    Ok(TrainedModel { params, threshold, log })
}
