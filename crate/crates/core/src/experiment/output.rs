//! Plot-ready CSV and `key: value` files for recipe runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Recipe, RunOutcome, RunRecord};
use crate::error::Result;
use crate::measures::{empirical_cdf, SourceSpec};
use crate::objective::tessellation_probabilities;
use crate::sgd::Init;

/// Grid points per axis for the tessellation output.
const GRID_1D: usize = 201;
const GRID_2D: usize = 41;

fn coord_header(d: usize) -> String {
    (0..d)
        .map(|l| format!("x{l}"))
        .collect::<Vec<_>>()
        .join(",")
}

fn coords(y: &[f64]) -> String {
    y.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

/// Rectangle covering the bulk of the source, one `(lo, hi)` per coordinate.
fn grid_bounds(source: &SourceSpec) -> Vec<(f64, f64)> {
    match source {
        SourceSpec::UniformBox { lo, hi } => lo.iter().copied().zip(hi.iter().copied()).collect(),
        SourceSpec::Empirical { points } => (0..source.dim())
            .map(|l| {
                points
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| {
                        (a.min(x[l]), b.max(x[l]))
                    })
            })
            .collect(),
        SourceSpec::Exponential { .. } | SourceSpec::Gamma { .. } => source
            .mean()
            .iter()
            .zip(source.coord_std())
            .map(|(mu, s)| (0.0, mu + 4.0 * s))
            .collect(),
        _ => source
            .mean()
            .iter()
            .zip(source.coord_std())
            .map(|(mu, s)| (mu - 4.0 * s, mu + 4.0 * s))
            .collect(),
    }
}

fn grid_points(source: &SourceSpec) -> Option<Vec<Vec<f64>>> {
    let bounds = grid_bounds(source);
    let axis = |(lo, hi): (f64, f64), n: usize| -> Vec<f64> {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    };
    match bounds.len() {
        1 => Some(
            axis(bounds[0], GRID_1D)
                .into_iter()
                .map(|x| vec![x])
                .collect(),
        ),
        2 => {
            let (xs, ys) = (axis(bounds[0], GRID_2D), axis(bounds[1], GRID_2D));
            Some(
                ys.iter()
                    .flat_map(|&y| xs.iter().map(move |&x| vec![x, y]))
                    .collect(),
            )
        }
        _ => None,
    }
}

pub(super) fn write_run(
    dir: &Path,
    recipe: &Recipe,
    outcome: &RunOutcome,
    center: &[f64],
) -> Result<()> {
    let cfg = &outcome.config;
    let d = cfg.source.dim();
    let state = &outcome.trajectory.final_state;

    if recipe.outputs.trajectory {
        let mut s = format!(
            "iteration,atom_index,{},weight,objective\n",
            coord_header(d)
        );
        for snap in &outcome.trajectory.snapshots {
            for (j, (y, w)) in snap
                .state
                .locations()
                .iter()
                .zip(snap.state.weights())
                .enumerate()
            {
                writeln!(
                    s,
                    "{},{j},{},{w},{}",
                    snap.iteration,
                    coords(y),
                    snap.objective
                )
                .unwrap();
            }
        }
        fs::write(dir.join("trajectory.csv"), s)?;
    }

    if recipe.outputs.final_state {
        let mut s = format!("atom_index,{},weight,cluster\n", coord_header(d));
        for (j, (y, w)) in state.locations().iter().zip(state.weights()).enumerate() {
            writeln!(s, "{j},{},{w},{}", coords(y), outcome.labels[j]).unwrap();
        }
        fs::write(dir.join("final.csv"), s)?;
    }

    if recipe.outputs.cdf && d == 1 {
        let mut s = String::from("location,cumulative\n");
        for (x, c) in empirical_cdf(&state.to_measure())? {
            writeln!(s, "{x},{c}").unwrap();
        }
        fs::write(dir.join("cdf.csv"), s)?;
    }

    if recipe.outputs.tessellation_grid {
        if let Some(points) = grid_points(&cfg.source) {
            let rows = tessellation_probabilities(&points, state, &cfg.distance, cfg.lambda)?;
            let mut s = format!("{},atom_index,probability\n", coord_header(d));
            for (x, row) in points.iter().zip(rows) {
                let (j, p) = row
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |acc, (j, &p)| if p > acc.1 { (j, p) } else { acc },
                    );
                writeln!(s, "{},{j},{p}", coords(x)).unwrap();
            }
            fs::write(dir.join("tessellation.csv"), s)?;
        }
    }

    let r = &outcome.record;
    let t = &outcome.trajectory;
    let init = match &cfg.init {
        Init::SampleM => "sample",
        Init::QuantileSpread => "quantile_spread",
        Init::Explicit(_) => "explicit",
    };
    let mut s = String::new();
    let mut kv = |k: &str, v: String| writeln!(s, "{k}: {v}").unwrap();
    kv("recipe", r.recipe.clone());
    kv("source", cfg.source.label());
    kv("lambda", r.lambda.to_string());
    kv("seed", r.seed.to_string());
    kv("m", cfg.m.to_string());
    kv("p", cfg.distance.p().to_string());
    kv("r", cfg.distance.r().to_string());
    kv("iterations", cfg.iterations.to_string());
    kv("batch_size", cfg.batch_size.to_string());
    kv("lr_scale", cfg.lr.scale().to_string());
    kv("lr_offset", cfg.lr.offset().to_string());
    kv("lr_exponent", cfg.lr.exponent().to_string());
    kv("init", init.into());
    kv(
        "init_weights",
        cfg.init_weights
            .as_deref()
            .map_or_else(|| "uniform".into(), coords),
    );
    kv("merge_radius", recipe.merge_radius().to_string());
    kv("distinct_count", r.distinct_count.to_string());
    kv("charged_count", r.charged_count.to_string());
    kv(
        "final_objective_at_lambda",
        r.final_objective_at_lambda.to_string(),
    );
    kv(
        "final_objective_at_zero",
        r.final_objective_at_zero.to_string(),
    );
    kv("center", coords(center));
    kv("center_distance", r.center_distance.to_string());
    kv("consumed_samples", t.consumed.to_string());
    kv("consumed_mean", coords(&t.consumed_mean));
    kv("skipped_samples", t.skipped.to_string());
    fs::write(dir.join("summary.txt"), s)?;
    Ok(())
}

pub(super) fn write_summary(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut s = String::from(
        "recipe,lambda,seed,distinct_count,charged_count,final_objective_at_lambda,final_objective_at_zero,center_distance\n",
    );
    for r in records {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.recipe,
            r.lambda,
            r.seed,
            r.distinct_count,
            r.charged_count,
            r.final_objective_at_lambda,
            r.final_objective_at_zero,
            r.center_distance
        )
        .unwrap();
    }
    fs::write(path, s)?;
    Ok(())
}
