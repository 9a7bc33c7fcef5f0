use std::path::Path;

use anyhow::{bail, Context as _};
use clap::ArgMatches;
use log::info;

use foodnet::augment::{affine_matrix, sample_affine, warp_bilinear, AugmentConfig};
use foodnet::bof::{BofConfig, BofModel, BOF_MAGIC};
use foodnet::dataset::{ingest_directory, make_synthetic, pack, PackedDataset};
use foodnet::metrics::{confusion_matrix, emit_chart, emit_curves, emit_report, EvalReport};
use foodnet::nn::{
    gradient_check, load_checkpoint, save_checkpoint, train_with_progress, CheckSpec, NetworkModel, TrainConfig,
    CHECKPOINT_MAGIC,
};
use foodnet::{sniff_magic, Rng, Tensor};

use crate::config::{given, pick, usage, FileConfig};
use crate::{
    AugmentFlags, AugmentPreviewArgs, EvalArgs, GradcheckArgs, IngestArgs, SplitArgs, SynthArgs, TrainBofArgs,
    TrainCnnArgs,
};

pub struct Context<'a> {
    pub seed: u64,
    pub file: FileConfig,
    pub matches: &'a ArgMatches,
}

impl Context<'_> {
    fn pick<T>(&self, id: &str, flag: T, file: Option<T>) -> T {
        pick(self.matches, id, flag, file)
    }

    fn augment_config(&self, f: &AugmentFlags) -> anyhow::Result<AugmentConfig> {
        let c = AugmentConfig {
            max_rotation_deg: self.pick("max_rotation", f.max_rotation, self.file.max_rotation),
            max_translate_frac: self.pick("max_translate", f.max_translate, self.file.max_translate),
            scale_min: self.pick("scale_min", f.scale_min, self.file.scale_min),
            scale_max: self.pick("scale_max", f.scale_max, self.file.scale_max),
            fill_value: self.pick("fill", f.fill, self.file.fill),
        };
        c.validate().map_err(|e| usage(e.to_string()))?;
        Ok(c)
    }
}

fn load_dataset(path: &Path) -> anyhow::Result<PackedDataset> {
    PackedDataset::load(path).with_context(|| format!("loading dataset {}", path.display()))
}

pub fn ingest(ctx: &Context, a: &IngestArgs) -> anyhow::Result<()> {
    let size = ctx.pick("size", a.size, ctx.file.size);
    if size == 0 {
        return Err(usage("--size must be ≥ 1"));
    }
    let manifest = ingest_directory(&a.root).with_context(|| format!("scanning {}", a.root.display()))?;
    let (dataset, report) = pack(&manifest, &a.out, size)?;
    for path in &report.skipped {
        eprintln!("skipped undecodable file {}", path.display());
    }
    println!(
        "packed {} images in {} classes into {} ({} skipped)",
        report.records,
        dataset.class_names.len(),
        a.out.display(),
        report.skipped.len()
    );
    Ok(())
}

pub fn synth(ctx: &Context, a: &SynthArgs) -> anyhow::Result<()> {
    let per_class = ctx.pick("per_class", a.per_class, ctx.file.per_class);
    let classes = ctx.pick("classes", a.classes, ctx.file.classes);
    let size = ctx.pick("size", a.size, ctx.file.size);
    let dataset = make_synthetic(classes, per_class, ctx.seed, size).map_err(|e| usage(e.to_string()))?;
    dataset.save(&a.out)?;
    println!("wrote {} synthetic images ({classes} classes, {size}×{size}) to {}", dataset.len(), a.out.display());
    Ok(())
}

pub fn split(ctx: &Context, a: &SplitArgs) -> anyhow::Result<()> {
    let frac = ctx.pick("frac", a.frac, ctx.file.frac);
    if !(frac > 0.0 && frac < 1.0) {
        return Err(usage(format!("--frac must lie in (0, 1), got {frac}")));
    }
    let dataset = load_dataset(&a.input)?;
    let (train, test) = dataset.split(frac, ctx.seed)?;
    train.save(&a.train_out)?;
    test.save(&a.test_out)?;
    println!("split {} images into {} train / {} test", dataset.len(), train.len(), test.len());
    Ok(())
}

pub fn train_cnn(ctx: &Context, a: &TrainCnnArgs) -> anyhow::Result<()> {
    let f = &ctx.file;
    let augment = if given(ctx.matches, "augment") {
        true
    } else if given(ctx.matches, "no_augment") {
        false
    } else {
        f.augment.unwrap_or(false)
    };
    let config = TrainConfig {
        eta0: ctx.pick("eta0", a.eta0, f.eta0),
        eta_max: ctx.pick("eta_max", a.eta_max, f.eta_max),
        batch_size: ctx.pick("batch_size", a.batch_size, f.batch_size),
        max_epochs: ctx.pick("max_epochs", a.max_epochs, f.max_epochs),
        patience: ctx.pick("patience", a.patience, f.patience),
        seed: ctx.seed,
        augment: if augment { Some(ctx.augment_config(&a.warp)?) } else { None },
    };
    config.validate().map_err(|e| usage(e.to_string()))?;

    let train = load_dataset(&a.train)?;
    let test = load_dataset(&a.test)?;
    if train.class_names != test.class_names {
        bail!("train and test datasets have different class lists");
    }
    if (train.height, train.width, train.channels) != (test.height, test.width, test.channels) {
        bail!("train and test datasets have different image shapes");
    }
    let model = NetworkModel::five_layer([train.height, train.width, train.channels], train.class_names.clone(), ctx.seed)?;
    info!(
        "training on {} images, testing on {}; {} parameters",
        train.len(),
        test.len(),
        model.parameter_count()
    );
    let outcome = train_with_progress(model, &train.to_image_set(), &test.to_image_set(), &config, |_| {})?;

    save_checkpoint(&outcome.model, &a.checkpoint_out)?;
    emit_curves(&outcome.curves, &a.curves_out)?;
    if let Some(chart) = &a.chart_out {
        emit_chart(&outcome.curves, chart)?;
    }
    println!(
        "best test accuracy {:.4} at epoch {} of {}{}",
        outcome.curves.best_test_acc().unwrap_or(0.0),
        outcome.best_epoch,
        outcome.curves.len(),
        if outcome.stopped_early { " (early stop)" } else { "" }
    );
    Ok(())
}

pub fn train_bof(ctx: &Context, a: &TrainBofArgs) -> anyhow::Result<()> {
    let f = &ctx.file;
    let config = BofConfig {
        k: ctx.pick("k", a.k, f.k),
        lambda: ctx.pick("lambda", a.lambda, f.lambda),
        svm_epochs: ctx.pick("svm_epochs", a.svm_epochs, f.svm_epochs),
        kmeans_iters: ctx.pick("kmeans_iters", a.kmeans_iters, f.kmeans_iters),
        max_descriptors: ctx.pick("max_descriptors", a.max_descriptors, f.max_descriptors),
        seed: ctx.seed,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    let train = load_dataset(&a.train)?;
    let model = BofModel::train(&train.to_image_set(), &config)?;
    model.save(&a.model_out)?;
    println!("trained {}-word vocabulary and {}-class SVM", model.codebook.k(), model.svm.classes());
    Ok(())
}

pub fn eval(_ctx: &Context, a: &EvalArgs) -> anyhow::Result<()> {
    let test = load_dataset(&a.test)?;
    let set = test.to_image_set();
    let magic = sniff_magic(&a.model)?;
    let (predicted, classes) = if &magic == CHECKPOINT_MAGIC {
        let model = load_checkpoint(&a.model)?;
        (model.predict(&set.image_refs())?, model.class_names().to_vec())
    } else if &magic == BOF_MAGIC {
        let model = BofModel::load(&a.model)?;
        (model.predict(&set.image_refs())?, test.class_names.clone())
    } else {
        bail!("{}: unrecognized model file (magic {:?})", a.model.display(), String::from_utf8_lossy(&magic));
    };
    if classes.len() != test.class_names.len() {
        bail!("model has {} classes, dataset has {}", classes.len(), test.class_names.len());
    }
    let matrix = confusion_matrix(&set.labels, &predicted, classes.len())?;
    let report = EvalReport::new(&test.class_names, &matrix)?;
    emit_report(&report, &a.report_out)?;
    println!("overall accuracy {:.4}, mean recognition rate {:.4}", report.overall_accuracy, report.mean_rr);
    for c in &report.per_class {
        println!("  {:<16} tpr {:.4} tnr {:.4} rr {:.4}", c.name, c.tpr, c.tnr, c.rr);
    }
    Ok(())
}

pub fn gradcheck(ctx: &Context, a: &GradcheckArgs) -> anyhow::Result<()> {
    let report = gradient_check(&CheckSpec::full_coverage(), ctx.seed, a.corrupt)?;
    println!(
        "max relative error {:.3e} over {} parameters (worst: set {}, {}, element {})",
        report.max_rel_error,
        report.checked,
        report.worst.0,
        if report.worst.1 { "bias" } else { "weight" },
        report.worst.2
    );
    if !report.passed() {
        bail!("gradient check failed: {:.3e} ≥ 1e-5", report.max_rel_error);
    }
    println!("gradient check passed");
    Ok(())
}

fn to_png(image: &Tensor, path: &Path) -> anyhow::Result<()> {
    let [h, w, c] = [image.shape()[0], image.shape()[1], image.shape()[2]];
    let bytes: Vec<u8> = image.data().iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
    let color = match c {
        1 => image::ExtendedColorType::L8,
        3 => image::ExtendedColorType::Rgb8,
        _ => bail!("cannot encode {c}-channel image as PNG"),
    };
    image::save_buffer(path, &bytes, w as u32, h as u32, color).with_context(|| format!("writing {}", path.display()))
}

pub fn augment_preview(ctx: &Context, a: &AugmentPreviewArgs) -> anyhow::Result<()> {
    let n = ctx.pick("n", a.n, ctx.file.n);
    let count = ctx.pick("count", a.count, ctx.file.count);
    let config = ctx.augment_config(&a.warp)?;
    let dataset = load_dataset(&a.dataset)?;
    if count == 0 || count > dataset.len() {
        return Err(usage(format!("--count must be in 1..={}", dataset.len())));
    }
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let mut rng = Rng::new(ctx.seed);
    for i in 0..count {
        let image = dataset.image(i);
        to_png(&image, &a.out_dir.join(format!("img{i}_orig.png")))?;
        for j in 0..n {
            let (params, next) = sample_affine(&config, dataset.width, dataset.height, rng);
            rng = next;
            let warped = warp_bilinear(&image, &affine_matrix(&params, dataset.width, dataset.height)?, config.fill_value);
            to_png(&warped, &a.out_dir.join(format!("img{i}_aug{j}.png")))?;
        }
    }
    println!("wrote {} originals and {} augmented images to {}", count, count * n, a.out_dir.display());
    Ok(())
}
