//! JSON run configuration shared by every subcommand.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{load_idx, LabeledImageSet};
use crate::error::{Error, Result};
use crate::field::{Channel, OpticalConfig};
use crate::metasurface::Point3;
use crate::model::{default_gaps, ChannelTask, DatasetId, DetectorLayout, Encoding, Region};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    pub layers: usize,
    /// `layers + 1` gaps in metres; defaults to contact input and 100 µm
    /// spacing elsewhere.
    #[serde(default)]
    pub gaps: Option<Vec<f64>>,
}

impl NetworkSection {
    pub fn resolved_gaps(&self) -> Vec<f64> {
        self.gaps
            .clone()
            .unwrap_or_else(|| default_gaps(self.layers))
    }
}

fn default_classes() -> usize {
    10
}

fn default_size_ratio() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFiles {
    pub images: PathBuf,
    pub labels: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub channel: Channel,
    pub dataset: DatasetId,
    #[serde(default)]
    pub encoding: Option<Encoding>,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "default_size_ratio")]
    pub size_ratio: f64,
    /// Explicit detector regions; overrides the standard layout.
    #[serde(default)]
    pub regions: Option<Vec<Region>>,
    /// Keep only these source labels, relabelled `0..k` in this order.
    #[serde(default)]
    pub class_filter: Option<Vec<usize>>,
    /// Binarize pixels at this threshold (mask-style inputs).
    #[serde(default)]
    pub binarize: Option<f64>,
    pub train: DataFiles,
    pub test: DataFiles,
}

impl TaskSection {
    pub fn channel_task(&self, n: usize) -> Result<ChannelTask> {
        let detector = match &self.regions {
            Some(regions) => DetectorLayout::new(n, self.size_ratio, regions.clone())?,
            None => DetectorLayout::standard(n, self.classes, self.size_ratio)?,
        };
        if detector.classes() != self.classes {
            return Err(Error::config(
                "regions",
                format!("{} regions for {} classes", detector.classes(), self.classes),
            ));
        }
        Ok(ChannelTask {
            channel: self.channel,
            dataset: self.dataset,
            encoding: self.encoding.unwrap_or(Encoding::Phase { max_phase: PI }),
            detector,
        })
    }

    fn load(&self, files: &DataFiles) -> Result<LabeledImageSet> {
        let mut set = load_idx(&files.images, &files.labels)?;
        if let Some(classes) = &self.class_filter {
            set = set.filter_classes(classes);
        }
        if let Some(t) = self.binarize {
            set = set.binarized(t)?;
        }
        Ok(set)
    }

    pub fn load_train(&self) -> Result<LabeledImageSet> {
        self.load(&self.train)
    }

    pub fn load_test(&self) -> Result<LabeledImageSet> {
        self.load(&self.test)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    /// Root for every artifact; the checkpoint goes to `<out>/checkpoint`
    /// unless `checkpoint` is set.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
    #[serde(default)]
    pub library: Option<PathBuf>,
}

fn default_pgm_samples() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    /// Number of leading test samples dumped as intensity PGMs.
    #[serde(default = "default_pgm_samples")]
    pub pgm_samples: usize,
    /// Score the test set after every training epoch.
    #[serde(default = "default_each_epoch")]
    pub each_epoch: bool,
}

fn default_each_epoch() -> bool {
    true
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            pgm_samples: default_pgm_samples(),
            each_epoch: default_each_epoch(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifocalSection {
    pub n: usize,
    pub focus_x: Point3,
    pub focus_y: Point3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub optics: OpticalConfig,
    #[serde(default)]
    pub network: Option<NetworkSection>,
    #[serde(default)]
    pub tasks: Vec<TaskSection>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub paths: PathsSection,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub bifocal: Option<BifocalSection>,
    /// Worker threads; defaults to the rayon global pool.
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    /// Parses `path`; relative paths inside are resolved against the
    /// directory containing it.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for t in &mut self.tasks {
            fix(&mut t.train.images);
            fix(&mut t.train.labels);
            fix(&mut t.test.images);
            fix(&mut t.test.labels);
        }
        for p in [
            &mut self.paths.out,
            &mut self.paths.checkpoint,
            &mut self.paths.library,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.paths.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.paths
            .checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir().join("checkpoint"))
    }

    pub fn channel_tasks(&self) -> Result<Vec<ChannelTask>> {
        self.tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                t.channel_task(self.optics.grid_n)
                    .map_err(|e| e.within(&format!("tasks[{i}]")))
            })
            .collect()
    }

    /// Checks the optics section only.
    pub fn validate_optics(&self) -> Result<()> {
        self.optics.validate().map_err(|e| e.within("optics"))?;
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(Error::config("threads", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// Everything `train`/`eval` need: optics, network, tasks, training
    /// settings and the existence of every dataset file.
    pub fn validate_for_training(&self) -> Result<()> {
        self.validate_optics()?;
        let network = self
            .network
            .as_ref()
            .ok_or_else(|| Error::config("network", "missing section"))?;
        crate::model::check_gaps(&network.resolved_gaps(), network.layers)
            .map_err(|e| e.within("network"))?;
        self.validate_tasks()?;
        self.train.validate().map_err(|e| e.within("train"))
    }

    pub fn validate_tasks(&self) -> Result<()> {
        let tasks = self.channel_tasks()?;
        crate::model::validate_tasks(&tasks, self.optics.grid_n)?;
        for (i, t) in self.tasks.iter().enumerate() {
            let scope = format!("tasks[{i}]");
            if let Some(th) = t.binarize {
                if !(th > 0.0 && th < 1.0) {
                    return Err(Error::config(format!("{scope}.binarize"), "must lie in (0, 1)"));
                }
            }
            if let Some(f) = &t.class_filter {
                if f.len() != t.classes {
                    return Err(Error::config(
                        format!("{scope}.class_filter"),
                        format!("lists {} labels for {} classes", f.len(), t.classes),
                    ));
                }
            }
            for (name, p) in [
                ("train.images", &t.train.images),
                ("train.labels", &t.train.labels),
                ("test.images", &t.test.images),
                ("test.labels", &t.test.labels),
            ] {
                if !p.is_file() {
                    return Err(Error::config(
                        format!("{scope}.{name}"),
                        format!("{} does not exist", p.display()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn validate_library_path(&self) -> Result<&Path> {
        let p = self
            .paths
            .library
            .as_deref()
            .ok_or_else(|| Error::config("paths.library", "no library given"))?;
        if !p.is_file() {
            return Err(Error::config(
                "paths.library",
                format!("{} does not exist", p.display()),
            ));
        }
        Ok(p)
    }

    pub fn validate_bifocal(&self) -> Result<&BifocalSection> {
        self.validate_optics()?;
        let b = self
            .bifocal
            .as_ref()
            .ok_or_else(|| Error::config("bifocal", "missing section"))?;
        if b.n < 2 {
            return Err(Error::config("bifocal.n", "need at least 2 samples per side"));
        }
        for (name, f) in [("focus_x", b.focus_x), ("focus_y", b.focus_y)] {
            if !(f.z.is_finite() && f.z > 0.0) {
                return Err(Error::config(format!("bifocal.{name}.z"), "must be positive"));
            }
            if !(f.x.is_finite() && f.y.is_finite()) {
                return Err(Error::config(format!("bifocal.{name}"), "must be finite"));
            }
        }
        Ok(b)
    }
}
