use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use optipace_core::{
    load_course, BikeParams, Course, CourseFormat, DynamicsVariant, RideModel, RiderParams,
};

use crate::ModelArgs;

/// Inputs of one solve or simulate run, validated before any computation.
pub struct RunManifest {
    pub model: RideModel,
    /// Course already resampled to `ds`.
    pub course: Course,
    pub ds: f64,
    pub v0: Option<f64>,
    pub out: PathBuf,
}

impl RunManifest {
    pub fn load(args: &ModelArgs) -> Result<Self> {
        let rider = RiderParams::load(&args.rider)
            .with_context(|| format!("loading rider {}", args.rider.display()))?;
        let bike = match &args.bike {
            Some(path) => BikeParams::load(path)
                .with_context(|| format!("loading bike {}", path.display()))?,
            None => BikeParams::default(),
        };
        let variant = if args.computrainer {
            DynamicsVariant::CompuTrainer
        } else {
            DynamicsVariant::Road
        };
        let model = RideModel::new(rider, bike, variant)?;

        let format = match args.format.as_deref() {
            Some("gpx") => CourseFormat::Gpx,
            Some(_) => CourseFormat::Csv,
            None => CourseFormat::from_path(&args.course),
        };
        let mut course = load_course(&args.course, format)
            .with_context(|| format!("loading course {}", args.course.display()))?;
        if let Some(window) = args.smooth {
            course = course.smoothed(window)?;
        }
        let course = course
            .resample(args.ds)
            .with_context(|| format!("resampling course at {} m", args.ds))?;

        create_dir(&args.out)?;
        Ok(Self {
            model,
            course,
            ds: args.ds,
            v0: args.v0,
            out: args.out.clone(),
        })
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
