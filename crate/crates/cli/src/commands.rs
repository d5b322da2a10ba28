use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use armas_core::eval::{evaluate as score, ms_to_samples, run_benchmark, simulate_gaps};
use armas_core::hcr::{self, CorrelationReport, StorageSizes};
use armas_core::regress::receiver_features;
use armas_core::stego::{halftone, self_embed, EmbedOptions};
use armas_core::{read_wav, write_wav, BenchmarkPlan, Error, GapSpec, GaussianConfig, Manifest, ReconstructConfig, Result};
use serde::Serialize;

use crate::{CorruptArgs, ReconstructArgs};

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn embed(input: &Path, output: &Path, manifest_path: &Path, seed: Option<u64>) -> Result<()> {
    let clip = read_wav(input)?;
    let (stego, manifest) = self_embed(&clip, &EmbedOptions { seed, ..EmbedOptions::default() })?;
    write_wav(&stego, output)?;
    manifest.save(manifest_path)
}

pub fn corrupt(args: &CorruptArgs) -> Result<()> {
    let mut clip = read_wav(&args.input)?;
    let mut manifest = Manifest::load(&args.manifest)?;
    manifest.check_clip(&clip)?;
    let rate = clip.sample_rate;
    let new_gaps = match (args.random, args.gap_start_ms) {
        (Some(n), _) => simulate_gaps(clip.len(), rate, &[args.gap_len_ms], n, args.seed)?,
        (None, Some(start_ms)) => {
            let gap = GapSpec::new(ms_to_samples(start_ms, rate), ms_to_samples(args.gap_len_ms, rate));
            if gap.len == 0 || gap.end() > clip.len() {
                return Err(Error::DoesNotFit(format!(
                    "gap [{}, {}) outside clip of {} samples",
                    gap.start,
                    gap.end(),
                    clip.len()
                )));
            }
            vec![gap]
        }
        (None, None) => return Err(Error::InvalidConfig("give --gap-start-ms or --random".into())),
    };
    let mut gaps = manifest.gaps.clone();
    gaps.extend(&new_gaps);
    GapSpec::check_all(&gaps, clip.len())?;
    for g in &new_gaps {
        clip.samples[g.range()].iter_mut().for_each(|s| *s = 0);
    }
    manifest.gaps = gaps;
    write_wav(&clip, &args.output)?;
    manifest.save(&args.manifest)
}

pub fn reconstruct(args: &ReconstructArgs) -> Result<()> {
    let manifest = Manifest::load(&args.manifest)?;
    let clip = read_wav(&args.input)?;
    let mut config = ReconstructConfig::default();
    config.forest.seed = args.seed.unwrap_or(manifest.seed);
    if let Some(t) = args.trees {
        config.forest.n_trees = t;
    }
    if let Some(m) = args.min_leaf {
        config.forest.min_leaf = m;
    }
    if let Some(r) = args.max_train_rows {
        config.forest.max_train_rows = r;
    }
    if let Some(p) = args.ar_order {
        config.janssen.ar_order = Some(p);
    }
    if let Some(i) = args.iterations {
        config.janssen.iterations = i;
    }
    if let Some(path) = &args.dump_features {
        manifest.check_clip(&clip)?;
        let table = receiver_features(&clip, &manifest, &config.scalogram)?;
        let mut w = BufWriter::new(File::create(path)?);
        table.write_csv(&mut w)?;
        w.flush()?;
    }
    let out = armas_core::reconstruct_gap(&clip, &manifest, args.method, &config)?;
    write_wav(&out, &args.output)
}

pub fn evaluate(reference: &Path, test: &Path, manifest: Option<&Path>, output: &Path) -> Result<()> {
    let reference = read_wav(reference)?;
    let test = read_wav(test)?;
    let gaps = match manifest {
        Some(path) => Manifest::load(path)?.gaps,
        None => Vec::new(),
    };
    let report = score(&reference.to_f64(), &test.to_f64(), &gaps)?;
    write_json(&report, output)
}

pub fn bench(plan: &Path, out_dir: &Path) -> Result<()> {
    let plan = BenchmarkPlan::load(plan)?;
    let report = run_benchmark(&plan, out_dir)?;
    println!("{}", serde_json::to_string(&report.summary)?);
    Ok(())
}

fn write_image(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct HcrDemoReport {
    sigma: f64,
    matrix_rows: usize,
    matrix_cols: usize,
    correlation: CorrelationReport,
    storage: StorageSizes,
}

pub fn hcr_demo(input: &Path, out_dir: &Path, sigma: f64) -> Result<()> {
    let clip = read_wav(input)?;
    let config = GaussianConfig { sigma };
    let (bytes, plane) = halftone(&clip, None)?;
    let original = hcr::reshape_to_matrix(&bytes.values, Some(plane.rows))?;
    let smoothed = hcr::inverse_halftone(&plane, &config)?;
    let flat = hcr::flatten_matrix(&smoothed);
    let correlation = hcr::hcr_roundtrip_stats(&bytes, &flat)?;

    fs::create_dir_all(out_dir)?;
    write_image(&out_dir.join("original.pgm"), |w| hcr::write_pgm(&original, 1.0, w))?;
    write_image(&out_dir.join("halftone.pbm"), |w| hcr::write_pbm(&plane, w))?;
    write_image(&out_dir.join("reconstructed.pgm"), |w| hcr::write_pgm(&smoothed, 255.0, w))?;
    let report = HcrDemoReport {
        sigma,
        matrix_rows: plane.rows,
        matrix_cols: plane.cols,
        correlation,
        storage: plane.storage(),
    };
    write_json(&report, &out_dir.join("correlation.json"))
}
