//! Evaluation artifacts: visitation records, skill diversity, exploration
//! coverage, learning-curve aggregation and a small SVG scatter writer.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::base::{StreamTag, Vec2};
use crate::envs::EnvConfig;
use crate::error::{Error, Result};
use crate::mi::cell_of;
use crate::policy::{ManagerPolicy, MlpSpec};
use crate::training::{hierarchical_rollout, rollout_stream, SkillSet};
use crate::trpo::ProgressRow;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitationRecord {
    pub rollout_id: usize,
    pub timestep: usize,
    pub x: f64,
    pub y: f64,
    pub latent: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentMode {
    /// One uniformly drawn latent per rollout.
    PerRolloutUniform,
    Fixed(usize),
    /// A uniform manager re-drawing the skill every `switch_time` steps.
    RandomManager(usize),
}

/// Roll the skills out from the environment's reset state and record the
/// robot position after every step.
pub fn visitation_run(
    skills: &SkillSet,
    env: &EnvConfig,
    n_rollouts: usize,
    horizon: usize,
    mode: LatentMode,
    seed: u64,
) -> Result<Vec<VisitationRecord>> {
    let k = skills.k();
    skills.validate(env.layout().agent_dim())?;
    let mut records = Vec::with_capacity(n_rollouts * horizon);
    for r in 0..n_rollouts {
        let root = rollout_stream(seed, StreamTag::Visitation, 0, r as u64);
        let mut e = env.build();
        let mut push = |t: usize, p: Vec2, z: usize| {
            records.push(VisitationRecord {
                rollout_id: r,
                timestep: t,
                x: p[0],
                y: p[1],
                latent: z,
            })
        };
        match mode {
            LatentMode::RandomManager(switch_time) => {
                let manager = ManagerPolicy::zeros(env.layout().full_dim(), k, MlpSpec::default())?;
                let m = hierarchical_rollout(&manager, skills, e.as_mut(), switch_time, horizon, &root)?;
                let latents = m
                    .skills
                    .iter()
                    .zip(&m.window_lengths)
                    .flat_map(|(&z, &n)| std::iter::repeat_n(z, n));
                for (t, (p, z)) in m.positions.iter().zip(latents).enumerate() {
                    push(t, *p, z);
                }
            }
            LatentMode::PerRolloutUniform | LatentMode::Fixed(_) => {
                let z = match mode {
                    LatentMode::Fixed(z) if z >= k => return Err(Error::LatentOutOfRange { latent: z, k }),
                    LatentMode::Fixed(z) => z,
                    _ => root.derive(StreamTag::Latent, 0, 0).random_range(0..k),
                };
                let mut env_rng = root.derive(StreamTag::Env, 0, 0);
                let mut act_rng = root.derive(StreamTag::Action, 0, 0);
                let mut obs = e.reset(&mut env_rng)?;
                for t in 0..horizon {
                    let a = skills.act(&obs.agent, z, &mut act_rng)?;
                    let step = e.step(&a)?;
                    push(t, e.com(), z);
                    obs = step.obs;
                    if step.done {
                        break;
                    }
                }
            }
        }
    }
    Ok(records)
}

/// Thresholds deciding when two skills count as distinct.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiversityThresholds {
    pub min_norm: f64,
    pub min_angle_deg: f64,
}

impl DiversityThresholds {
    /// Displacement at least 0.3 of a quarter of the maximum travel over the
    /// horizon, and 45 degrees apart.
    pub fn for_travel(v_max: f64, horizon: usize) -> Self {
        Self {
            min_norm: 0.3 * v_max * horizon as f64 * 0.25,
            min_angle_deg: 45.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkillDiversityReport {
    pub k: usize,
    /// Mean terminal displacement per latent; `None` when it had no rollouts.
    pub mean_displacement: Vec<Option<Vec2>>,
    pub rollouts_per_latent: Vec<usize>,
    /// Pairwise angles in degrees, `None` where either latent is missing.
    pub separations: Vec<Vec<Option<f64>>>,
    pub distinct_count: usize,
    /// Latents with no rollouts, excluded from the count.
    pub missing_latents: Vec<usize>,
    pub thresholds: DiversityThresholds,
}

fn angle_deg(a: Vec2, b: Vec2) -> f64 {
    let na = a[0].hypot(a[1]);
    let nb = b[0].hypot(b[1]);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let c = ((a[0] * b[0] + a[1] * b[1]) / (na * nb)).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

/// Largest set of latents that are pairwise distinct: both displacement
/// norms reach `min_norm` and their directions differ by `min_angle_deg`.
/// Any latent with data counts as one behavior, so the result is at least 1
/// whenever some latent was observed.
pub fn max_distinct_subset(means: &[Option<Vec2>], th: &DiversityThresholds) -> usize {
    let k = means.len();
    assert!(k <= 20, "exhaustive subset search limited to 20 latents");
    let eligible: Vec<bool> = means
        .iter()
        .map(|m| m.is_some_and(|v| v[0].hypot(v[1]) >= th.min_norm))
        .collect();
    let distinct = |i: usize, j: usize| {
        eligible[i] && eligible[j] && angle_deg(means[i].unwrap(), means[j].unwrap()) >= th.min_angle_deg
    };
    let mut best = 0;
    for mask in 1u32..(1 << k) {
        let members: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
        if members.len() <= best || members.iter().any(|&i| means[i].is_none()) {
            continue;
        }
        let ok = members.len() == 1
            || members
                .iter()
                .enumerate()
                .all(|(a, &i)| members[a + 1..].iter().all(|&j| distinct(i, j)));
        if ok {
            best = members.len();
        }
    }
    best
}

pub fn diversity_report(records: &[VisitationRecord], k: usize, thresholds: DiversityThresholds) -> Result<SkillDiversityReport> {
    // terminal record of each rollout
    let mut last: std::collections::BTreeMap<usize, &VisitationRecord> = Default::default();
    for r in records {
        if r.latent >= k {
            return Err(Error::LatentOutOfRange { latent: r.latent, k });
        }
        let e = last.entry(r.rollout_id).or_insert(r);
        if r.timestep >= e.timestep {
            *e = r;
        }
    }
    let mut sums = vec![([0.0, 0.0], 0usize); k];
    for r in last.values() {
        let s = &mut sums[r.latent];
        s.0[0] += r.x;
        s.0[1] += r.y;
        s.1 += 1;
    }
    let mean_displacement: Vec<Option<Vec2>> = sums
        .iter()
        .map(|(s, n)| (*n > 0).then(|| [s[0] / *n as f64, s[1] / *n as f64]))
        .collect();
    let separations = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| Some(angle_deg(mean_displacement[i]?, mean_displacement[j]?)))
                .collect()
        })
        .collect();
    Ok(SkillDiversityReport {
        k,
        distinct_count: max_distinct_subset(&mean_displacement, &thresholds),
        missing_latents: (0..k).filter(|&z| sums[z].1 == 0).collect(),
        rollouts_per_latent: sums.iter().map(|s| s.1).collect(),
        mean_displacement,
        separations,
        thresholds,
    })
}

/// Number of distinct grid cells containing a recorded position.
pub fn coverage(records: &[VisitationRecord], mesh_density: f64) -> Result<usize> {
    let mut cells = HashSet::with_capacity(records.len());
    for r in records {
        cells.insert(cell_of([r.x, r.y], mesh_density)?);
    }
    Ok(cells.len())
}

pub fn write_visitation_csv(records: &[VisitationRecord], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_visitation_csv(r: impl Read) -> Result<Vec<VisitationRecord>> {
    csv::Reader::from_reader(r)
        .deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Scatter of positions colored by latent on a square `[-extent, extent]`
/// frame.
pub fn write_svg(records: &[VisitationRecord], extent: f64, mut w: impl Write) -> Result<()> {
    const SIZE: f64 = 600.0;
    const PALETTE: [&str; 8] = [
        "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    ];
    let map = |v: f64| (v + extent) / (2.0 * extent) * SIZE;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let mid = SIZE / 2.0;
    let _ = writeln!(
        s,
        r##"<path d="M0 {mid}H{SIZE}M{mid} 0V{SIZE}" stroke="#bbbbbb" stroke-width="1"/>"##
    );
    for r in records {
        if r.x.abs() > extent || r.y.abs() > extent {
            continue;
        }
        let _ = writeln!(
            s,
            r#"<circle cx="{:.2}" cy="{:.2}" r="1" fill="{}"/>"#,
            map(r.x),
            SIZE - map(r.y),
            PALETTE[r.latent % PALETTE.len()]
        );
    }
    s.push_str("</svg>\n");
    w.write_all(s.as_bytes())?;
    Ok(())
}

const PROGRESS_COLUMNS: [&str; 7] = [
    "iteration",
    "mean_return",
    "surrogate",
    "kl",
    "step_norm",
    "backtracks",
    "residual",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub iteration: usize,
    pub mean: f64,
    pub std: f64,
}

fn read_progress(path: &Path) -> Result<Vec<ProgressRow>> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    for (i, col) in PROGRESS_COLUMNS.iter().enumerate() {
        if headers.get(i) != Some(*col) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                column: col.to_string(),
            });
        }
    }
    if headers.len() != PROGRESS_COLUMNS.len() {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            column: headers.get(PROGRESS_COLUMNS.len()).unwrap_or_default().to_string(),
        });
    }
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn column_value(row: &ProgressRow, column: &str) -> Option<f64> {
    Some(match column {
        "mean_return" => row.mean_return,
        "surrogate" => row.surrogate,
        "kl" => row.kl,
        "step_norm" => row.step_norm,
        "backtracks" => row.backtracks as f64,
        "residual" => row.residual,
        _ => return None,
    })
}

/// Per-iteration mean and population standard deviation of `column` across
/// runs; shorter runs are padded with their last value.
pub fn learning_curve(paths: &[PathBuf], column: &str) -> Result<Vec<CurveRow>> {
    if column_value(&ProgressRow::new(0, 0.0, &Default::default()), column).is_none() {
        return Err(Error::InvalidArgument(format!("unknown progress column {column:?}")));
    }
    let runs = paths.iter().map(|p| read_progress(p)).collect::<Result<Vec<_>>>()?;
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::with_capacity(len);
    for t in 0..len {
        let vals: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.get(t).or(r.last()))
            .map(|row| column_value(row, column).unwrap())
            .collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        let iteration = runs
            .iter()
            .find_map(|r| r.get(t))
            .map_or(t, |row| row.iteration);
        out.push(CurveRow { iteration, mean, std });
    }
    Ok(out)
}

pub fn write_curve_csv(rows: &[CurveRow], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::RngStream;
    use crate::policy::{Integration, SnnPolicy};
    use crate::trpo::{write_progress, StepDiagnostics};
    use proptest::prelude::*;
    use rand_distr::StandardNormal;

    fn rec(rollout_id: usize, timestep: usize, x: f64, y: f64, latent: usize) -> VisitationRecord {
        VisitationRecord {
            rollout_id,
            timestep,
            x,
            y,
            latent,
        }
    }

    fn gaussian_skills() -> SkillSet {
        SkillSet::Snn(SnnPolicy::zeros(4, 2, 1, Integration::Plain, MlpSpec::default()).unwrap())
    }

    #[test]
    fn record_count_is_rollouts_times_horizon() {
        let r = visitation_run(&gaussian_skills(), &EnvConfig::pretrain(), 100, 500, LatentMode::PerRolloutUniform, 0).unwrap();
        assert_eq!(r.len(), 50_000);
    }

    #[test]
    fn fixed_mode_records_carry_that_latent() {
        let mut rng = RngStream::new(0, 0);
        let snn = SkillSet::Snn(SnnPolicy::new(4, 2, 6, Integration::Bilinear, MlpSpec::new(vec![8]), &mut rng).unwrap());
        let r = visitation_run(&snn, &EnvConfig::pretrain(), 3, 20, LatentMode::Fixed(4), 1).unwrap();
        assert!(r.iter().all(|x| x.latent == 4));
        assert!(visitation_run(&snn, &EnvConfig::pretrain(), 1, 5, LatentMode::Fixed(6), 1).is_err());
        let m = visitation_run(&snn, &EnvConfig::pretrain(), 1, 100, LatentMode::RandomManager(10), 1).unwrap();
        assert_eq!(m.len(), 100);
        for w in m.chunks(10) {
            assert!(w.iter().all(|x| x.latent == w[0].latent));
        }
    }

    #[test]
    fn gaussian_walk_stays_in_simulated_envelope() {
        // Simulate the damped clipped random walk directly and compare the
        // spread of terminal positions.
        let horizon = 200;
        let runs = 200;
        let recs = visitation_run(&gaussian_skills(), &EnvConfig::pretrain(), runs, horizon, LatentMode::PerRolloutUniform, 3).unwrap();
        let d = crate::envs::Dynamics::default();
        let mut rng = RngStream::new(99, 0);
        let mut sq = 0.0;
        for _ in 0..2000 {
            let (mut p, mut v) = ([0.0f64; 2], [0.0f64; 2]);
            for _ in 0..horizon {
                let a: [f64; 2] = [rand::Rng::sample::<f64, _>(&mut rng, StandardNormal).clamp(-1.0, 1.0), rand::Rng::sample::<f64, _>(&mut rng, StandardNormal).clamp(-1.0, 1.0)];
                for i in 0..2 {
                    v[i] = (1.0 - d.damping) * v[i] + d.force_gain * a[i];
                }
                let n = v[0].hypot(v[1]);
                if n > d.v_max {
                    v = [v[0] * d.v_max / n, v[1] * d.v_max / n];
                }
                p = [p[0] + v[0], p[1] + v[1]];
            }
            sq += p[0] * p[0] / 2000.0;
        }
        let sigma = sq.sqrt();
        for r in &recs {
            assert!(r.x.abs() <= 6.0 * sigma && r.y.abs() <= 6.0 * sigma, "{r:?} vs sigma {sigma}");
        }
    }

    fn th() -> DiversityThresholds {
        DiversityThresholds {
            min_norm: 1.0,
            min_angle_deg: 45.0,
        }
    }

    #[test]
    fn antipodal_latents_are_distinct() {
        let recs = vec![rec(0, 0, 5.0, 0.0, 0), rec(1, 0, -5.0, 0.0, 1)];
        let r = diversity_report(&recs, 2, th()).unwrap();
        assert!((r.separations[0][1].unwrap() - 180.0).abs() < 1e-12);
        assert_eq!(r.distinct_count, 2);
    }

    #[test]
    fn identical_latents_count_once() {
        let recs: Vec<_> = (0..6).map(|z| rec(z, 9, 3.0, 3.0, z)).collect();
        assert_eq!(diversity_report(&recs, 6, th()).unwrap().distinct_count, 1);
    }

    #[test]
    fn sixty_degree_fan_gives_six() {
        let recs: Vec<_> = (0..6)
            .map(|z| {
                let a = (z as f64 * 60.0).to_radians();
                rec(z, 0, 4.0 * a.cos(), 4.0 * a.sin(), z)
            })
            .collect();
        let r = diversity_report(&recs, 6, th()).unwrap();
        assert_eq!(r.distinct_count, 6);
    }

    /// Independent oracle: greedy extension from every ordering is not
    /// exhaustive, so enumerate cliques by recursion instead.
    fn clique_oracle(ok: &dyn Fn(usize, usize) -> bool, nodes: &[usize], chosen: &mut Vec<usize>) -> usize {
        let mut best = chosen.len();
        for (i, &n) in nodes.iter().enumerate() {
            if chosen.iter().all(|&c| ok(c, n)) {
                chosen.push(n);
                best = best.max(clique_oracle(ok, &nodes[i + 1..], chosen));
                chosen.pop();
            }
        }
        best
    }

    proptest! {
        #[test]
        fn subset_search_matches_clique_oracle(angles in prop::collection::vec((0.0f64..360.0, 0.0f64..3.0), 1..=6)) {
            let means: Vec<Option<Vec2>> = angles
                .iter()
                .map(|(a, n)| Some([n * a.to_radians().cos(), n * a.to_radians().sin()]))
                .collect();
            let t = th();
            let ok = |i: usize, j: usize| {
                let (a, b) = (means[i].unwrap(), means[j].unwrap());
                a[0].hypot(a[1]) >= t.min_norm && b[0].hypot(b[1]) >= t.min_norm && angle_deg(a, b) >= t.min_angle_deg
            };
            let nodes: Vec<usize> = (0..means.len()).collect();
            let mut pairs = 0;
            for i in 0..means.len() { for j in i+1..means.len() { pairs += usize::from(ok(i, j)); } }
            let mut oracle = clique_oracle(&ok, &nodes, &mut Vec::new());
            if pairs == 0 { oracle = 1; }
            prop_assert_eq!(max_distinct_subset(&means, &t), oracle.max(1));
        }

        #[test]
        fn report_invariant_to_order_and_rotation(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0, 0usize..4), 4..30),
            theta in 0.0f64..std::f64::consts::TAU,
        ) {
            let recs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y, z))| rec(i, 0, x, y, z)).collect();
            let base = diversity_report(&recs, 4, th()).unwrap();
            let mut rev = recs.clone();
            rev.reverse();
            prop_assert_eq!(diversity_report(&rev, 4, th()).unwrap().distinct_count, base.distinct_count);
            let (c, s) = (theta.cos(), theta.sin());
            let rot: Vec<_> = recs.iter().map(|r| rec(r.rollout_id, 0, c * r.x - s * r.y, s * r.x + c * r.y, r.latent)).collect();
            let rr = diversity_report(&rot, 4, th()).unwrap();
            // angles between non-degenerate means survive rotation up to rounding
            let big = |m: Option<Vec2>| m.is_some_and(|v| v[0].hypot(v[1]) > 1e-3);
            for i in 0..4 { for j in 0..4 {
                if let (Some(a), Some(b)) = (base.separations[i][j], rr.separations[i][j]) {
                    if big(base.mean_displacement[i]) && big(base.mean_displacement[j]) {
                        prop_assert!((a - b).abs() < 1e-4, "{} vs {}", a, b);
                    }
                }
            }}
        }

        #[test]
        fn coverage_is_monotone(pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..100)) {
            let recs: Vec<_> = pts.iter().enumerate().map(|(i, &(x, y))| rec(0, i, x, y, 0)).collect();
            let mut prev = 0;
            for n in 1..=recs.len() {
                let c = coverage(&recs[..n], 10.0).unwrap();
                prop_assert!(c >= prev);
                prev = c;
            }
        }

        #[test]
        fn visitation_csv_round_trips(pts in prop::collection::vec((0usize..5, 0usize..500, -50.0f64..50.0, -50.0f64..50.0, 0usize..6), 0..50)) {
            let recs: Vec<_> = pts.iter().map(|&(r, t, x, y, z)| rec(r, t, x, y, z)).collect();
            let mut buf = Vec::new();
            write_visitation_csv(&recs, &mut buf).unwrap();
            prop_assert_eq!(read_visitation_csv(buf.as_slice()).unwrap(), recs);
        }
    }

    #[test]
    fn missing_latent_is_flagged() {
        let recs = vec![rec(0, 0, 5.0, 0.0, 0)];
        let r = diversity_report(&recs, 3, th()).unwrap();
        assert_eq!(r.missing_latents, vec![1, 2]);
        assert!(r.mean_displacement[1].is_none());
    }

    #[test]
    fn coverage_examples() {
        let still: Vec<_> = (0..10).map(|t| rec(0, t, 0.0, 0.0, 0)).collect();
        assert_eq!(coverage(&still, 10.0).unwrap(), 1);
        // 3 units along x in 0.05 steps, both endpoints included
        let line: Vec<_> = (0..=60).map(|t| rec(0, t, t as f64 * 0.05, 0.0, 0)).collect();
        let oracle: HashSet<i64> = (0..=60).map(|t| (t as f64 * 0.05 * 10.0).floor() as i64).collect();
        assert_eq!(oracle.len(), 31);
        assert_eq!(coverage(&line, 10.0).unwrap(), 31);
    }

    fn progress_file(dir: &Path, name: &str, values: &[f64]) -> PathBuf {
        let rows: Vec<_> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| ProgressRow::new(i, v, &StepDiagnostics::default()))
            .collect();
        let p = dir.join(name);
        write_progress(&rows, std::fs::File::create(&p).unwrap()).unwrap();
        p
    }

    #[test]
    fn learning_curve_examples() {
        let dir = tempfile::tempdir().unwrap();
        let one = progress_file(dir.path(), "a.csv", &[1.0, 2.0, 3.0]);
        let c = learning_curve(std::slice::from_ref(&one), "mean_return").unwrap();
        assert!(c.iter().all(|r| r.std == 0.0));

        let zeros = progress_file(dir.path(), "z.csv", &[0.0; 4]);
        let ones = progress_file(dir.path(), "o.csv", &[1.0; 4]);
        let c = learning_curve(&[zeros, ones], "mean_return").unwrap();
        assert!(c.iter().all(|r| r.mean == 0.5 && r.std == 0.5));

        let long = progress_file(dir.path(), "l.csv", &(0..10).map(f64::from).collect::<Vec<_>>());
        let short = progress_file(dir.path(), "s.csv", &[7.0; 8]);
        let c = learning_curve(&[long, short], "mean_return").unwrap();
        assert_eq!(c.len(), 10);
        assert_eq!(c[8].mean, (8.0 + 7.0) / 2.0);
        assert_eq!(c[9].mean, (9.0 + 7.0) / 2.0);
        assert_eq!(c[9].iteration, 9);
    }

    #[test]
    fn learning_curve_schema_errors() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "iteration,mean_reward,surrogate,kl,step_norm,backtracks,residual\n0,1,0,0,0,0,0\n").unwrap();
        match learning_curve(&[bad], "mean_return") {
            Err(Error::Schema { column, .. }) => assert_eq!(column, "mean_return"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            learning_curve(&[dir.path().join("nope.csv")], "mean_return"),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn svg_is_well_formed() {
        let recs = vec![rec(0, 0, 1.0, 1.0, 0), rec(0, 1, 100.0, 0.0, 1)];
        let mut buf = Vec::new();
        write_svg(&recs, 30.0, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("<svg") && s.trim_end().ends_with("</svg>"));
        assert_eq!(s.matches("<circle").count(), 1);
    }
}
