//! Subcommand implementations. Each returns a process exit code on success;
//! errors bubble to main for uniform reporting.

use crate::{FormatArg, InterpArg, LossKindArg, MorphOp, Organ, SuiteArg, WceModeArg};
use serde_json::json;
use std::fs;
use std::path::Path;
use voxelforge_core::augment3d::{pipeline_run_with, ApplyOptions, AugmentSpec};
use voxelforge_core::autolabel::{
    label_bones, label_lungs, make_phantom, BoneParams, LungParams, PhantomSpec,
};
use voxelforge_core::fftmorph::{ball_element, close, dilate, erode, open};
use voxelforge_core::segloss::{
    check_metric, grad_check, iou_loss_power, penalty_curves, restriction_bound,
    weighted_cross_entropy, BinaryField, LossKind, ProbField, WceMode,
};
use voxelforge_core::volgrid::{
    read_volume, resample as resample_volume, write_volume, Connectivity, Interpolation,
    VolumeFormat,
};
use voxelforge_core::{Dtype, Error, LabelMap, Mask, Result, Volume};

pub const REPORT_SCHEMA: u32 = 1;

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn label(
    organ: Organ,
    input: &Path,
    out: &Path,
    air_max: f32,
    erode_mm: f64,
    n_lungs: usize,
    tau1: f32,
    tau2: f32,
    close_mm: f64,
    connectivity: u8,
) -> Result<i32> {
    let ct = read_volume(input)?;
    let mask = match organ {
        Organ::Lungs => label_lungs(
            &ct,
            &LungParams {
                air_hu_max: air_max,
                erosion_diameter_mm: erode_mm,
                n_lungs,
            },
        )?,
        Organ::Bones => {
            let skeleton_connectivity = match connectivity {
                6 => Connectivity::Six,
                26 => Connectivity::TwentySix,
                other => {
                    return Err(Error::InvalidParameter(format!(
                        "connectivity must be 6 or 26, got {other}"
                    )))
                }
            };
            label_bones(
                &ct,
                &BoneParams {
                    tau1,
                    tau2,
                    closing_diameter_mm: close_mm,
                    skeleton_connectivity,
                },
            )?
        }
    };
    write_volume(&mask.to_volume(Dtype::U8), out, VolumeFormat::Vgrid)?;
    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "label",
            "voxels": mask.count_ones(),
            "out": out.display().to_string(),
        })
    );
    Ok(0)
}

fn read_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_owned)
        .collect())
}

#[allow(clippy::too_many_arguments)]
pub fn augment(
    inputs: &Path,
    labels: &Path,
    spec_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
    batch: usize,
    depth: usize,
    occlude_labels: bool,
) -> Result<i32> {
    let image_paths = read_list(inputs)?;
    let label_paths = read_list(labels)?;
    if image_paths.len() != label_paths.len() {
        return Err(Error::LengthMismatch {
            left: image_paths.len(),
            right: label_paths.len(),
        });
    }
    if image_paths.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if batch == 0 {
        return Err(Error::InvalidParameter("batch size must be >= 1".into()));
    }
    let spec_text = fs::read_to_string(spec_path).map_err(|e| io_error(spec_path, e))?;
    let mut spec: AugmentSpec =
        serde_json::from_str(&spec_text).map_err(|e| Error::MalformedHeader {
            path: spec_path.to_path_buf(),
            reason: e.to_string(),
        })?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;

    let options = ApplyOptions {
        occlude_labels,
        ..Default::default()
    };
    let mut written = 0usize;
    for chunk_start in (0..image_paths.len()).step_by(batch) {
        let chunk_end = (chunk_start + batch).min(image_paths.len());
        let mut items = Vec::with_capacity(chunk_end - chunk_start);
        for k in chunk_start..chunk_end {
            let image = read_volume(&image_paths[k])?;
            let label_volume = read_volume(&label_paths[k])?;
            let label_map = LabelMap::from_volume(&label_volume)?;
            items.push((image, label_map));
        }
        // Per-item parameters are seeded by global index, so chunking does
        // not change outputs.
        let pairs = pipeline_run_with(&items, &spec, depth, chunk_start, &options)?;
        for (k, pair) in pairs.iter().enumerate() {
            let index = chunk_start + k;
            write_volume(
                &pair.image,
                out_dir.join(format!("item_{index:04}_image")),
                VolumeFormat::Vgrid,
            )?;
            write_volume(
                &pair.labels.to_volume(),
                out_dir.join(format!("item_{index:04}_labels")),
                VolumeFormat::Vgrid,
            )?;
            let params_path = out_dir.join(format!("item_{index:04}_params.json"));
            let params_text = serde_json::to_string_pretty(&pair.params).expect("params serialize");
            fs::write(&params_path, params_text).map_err(|e| io_error(&params_path, e))?;
            written += 1;
        }
    }
    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "augment",
            "items": written,
            "seed": spec.seed,
            "depth": depth,
            "out_dir": out_dir.display().to_string(),
        })
    );
    Ok(0)
}

pub fn resample(
    input: &Path,
    out: &Path,
    res_mm: f64,
    interp: InterpArg,
    format: FormatArg,
) -> Result<i32> {
    let volume = read_volume(input)?;
    let interpolation = match interp {
        InterpArg::Trilinear => Interpolation::Trilinear,
        InterpArg::Nearest => Interpolation::Nearest,
    };
    let resampled = resample_volume(&volume, res_mm, interpolation)?;
    let fmt = match format {
        FormatArg::Vgrid => VolumeFormat::Vgrid,
        FormatArg::Nifti => VolumeFormat::Nifti,
    };
    write_volume(&resampled, out, fmt)?;
    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "resample",
            "in_dims": volume.dims(),
            "out_dims": resampled.dims(),
            "res_mm": res_mm,
        })
    );
    Ok(0)
}

pub fn morph(op: MorphOp, input: &Path, out: &Path, ball_mm: f64) -> Result<i32> {
    let volume = read_volume(input)?;
    let mask = Mask::from_volume(&volume)?;
    let element = ball_element(ball_mm, volume.spacing_mm())?;
    let result = match op {
        MorphOp::Dilate => dilate(&mask, &element)?,
        MorphOp::Erode => erode(&mask, &element)?,
        MorphOp::Open => open(&mask, &element)?,
        MorphOp::Close => close(&mask, &element)?,
    };
    write_volume(&result.to_volume(Dtype::U8), out, VolumeFormat::Vgrid)?;
    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "morph",
            "element_dims": element.dims(),
            "voxels_before": mask.count_ones(),
            "voxels_after": result.count_ones(),
        })
    );
    Ok(0)
}

pub fn loss(
    kind: LossKindArg,
    pred: &Path,
    truth: &Path,
    power: f64,
    wce_mode: WceModeArg,
    grad_out: Option<&Path>,
) -> Result<i32> {
    let pred_volume = read_volume(pred)?;
    let truth_volume = read_volume(truth)?;
    let p = ProbField::from_volume(&pred_volume)?;
    let y = BinaryField::from_mask(&Mask::from_volume(&truth_volume)?);

    let (name, report) = match kind {
        LossKindArg::Iou => (
            "iou".to_owned(),
            voxelforge_core::segloss::iou_loss(&p, &y)?,
        ),
        LossKindArg::Dice => (
            "dice".to_owned(),
            voxelforge_core::segloss::dice_loss(&p, &y)?,
        ),
        LossKindArg::IouPow => (format!("iou-pow({power})"), iou_loss_power(&p, &y, power)?),
        LossKindArg::Wce => {
            let mode = match wce_mode {
                WceModeArg::ClassFrequency => WceMode::ClassFrequency,
                WceModeArg::InverseFrequency => WceMode::InverseFrequency,
            };
            ("wce".to_owned(), weighted_cross_entropy(&p, &y, mode)?)
        }
    };

    if let Some(path) = grad_out {
        let gradient = report
            .gradient
            .as_ref()
            .expect("scalar losses provide gradients");
        let data: Vec<f32> = gradient.iter().map(|&g| g as f32).collect();
        let volume = Volume::new(*pred_volume.geometry(), Dtype::F32, data)?;
        write_volume(&volume, path, VolumeFormat::Vgrid)?;
    }

    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "loss",
            "kind": name,
            "n": p.len(),
            "value": report.value,
            "truth_voxels": y.count_ones(),
        })
    );
    Ok(0)
}

pub fn verify(suite: SuiteArg, seed: u64) -> Result<i32> {
    let (passed, body) = match suite {
        SuiteArg::Metric => {
            let iou = check_metric(LossKind::Iou, 3);
            let dice = check_metric(LossKind::Dice, 2);
            // IOU must satisfy the axioms; Dice must fail the triangle
            // inequality on the canonical counterexample.
            let dice_violates = !dice.passed
                && dice
                    .counterexample
                    .as_ref()
                    .is_some_and(|ce| ce.p == [0, 1] && ce.y == [1, 0] && ce.r == [1, 1]);
            (
                iou.passed && dice_violates,
                json!({ "iou": iou, "dice": dice }),
            )
        }
        SuiteArg::Penalty => {
            let n = 100u64;
            let eps: Vec<u64> = (0..=10).collect();
            let table = penalty_curves(n, &eps)?;
            let big = penalty_curves(1_000_000, &[1])?;
            let rel = (big[0].l_fn - big[0].l_fp).abs() / big[0].l_fn;
            (
                rel < 1e-6,
                json!({
                    "n": n,
                    "points": table,
                    "large_n_relative_gap": rel,
                }),
            )
        }
        SuiteArg::Gradcheck => {
            let mut reports = Vec::new();
            let mut all = true;
            for kind in [
                LossKind::Iou,
                LossKind::Dice,
                LossKind::IouPower(0.5),
                LossKind::IouPower(2.0),
                LossKind::IouPower(3.0),
            ] {
                let r = grad_check(kind, 100, 64, 1e-4, seed);
                all &= r.passed;
                reports.push(r);
            }
            (all, json!({ "checks": reports }))
        }
        SuiteArg::Restriction => {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut violations = 0usize;
            let trials = 100_000usize;
            for _ in 0..trials {
                let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                    BinaryField::new((0..32).map(|_| u8::from(rng.gen_bool(0.5))).collect())
                        .expect("binary")
                };
                let (p, g, s) = (draw(&mut rng), draw(&mut rng), draw(&mut rng));
                if !restriction_bound(&p, &g, &s)?.holds {
                    violations += 1;
                }
            }
            (
                violations == 0,
                json!({ "trials": trials, "violations": violations }),
            )
        }
    };

    let suite_name = match suite {
        SuiteArg::Metric => "metric",
        SuiteArg::Penalty => "penalty",
        SuiteArg::Gradcheck => "gradcheck",
        SuiteArg::Restriction => "restriction",
    };
    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "verify",
            "suite": suite_name,
            "passed": passed,
            "report": body,
        })
    );
    Ok(if passed { 0 } else { 1 })
}

pub fn phantom(out: &Path, seed: u64, sigma: Option<f64>) -> Result<i32> {
    let mut spec = PhantomSpec::randomized(seed);
    if let Some(sigma) = sigma {
        spec.noise_sigma = sigma;
    }
    let (ct, truth) = make_phantom(&spec, seed)?;
    let prefix = out.display();
    write_volume(&ct, format!("{prefix}_ct"), VolumeFormat::Vgrid)?;
    write_volume(
        &truth.lungs.to_volume(Dtype::U8),
        format!("{prefix}_lungs"),
        VolumeFormat::Vgrid,
    )?;
    write_volume(
        &truth.bones.to_volume(Dtype::U8),
        format!("{prefix}_bones"),
        VolumeFormat::Vgrid,
    )?;
    println!(
        "{}",
        json!({
            "schema": REPORT_SCHEMA,
            "command": "phantom",
            "seed": seed,
            "dims": ct.dims(),
            "noise_sigma": spec.noise_sigma,
            "lung_voxels": truth.lungs.count_ones(),
            "bone_voxels": truth.bones.count_ones(),
        })
    );
    Ok(0)
}
