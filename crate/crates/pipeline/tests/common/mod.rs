//! Synthetic repository populations with two latent drivers: community
//! activity and popularity.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use ce_core::RepositoryRecord;
use ce_pipeline::AnalysisConfig;
use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn reference_date() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap()
}

fn count(rng: &mut ChaCha8Rng, mean_log: f64) -> u64 {
    let noise = Normal::new(0.0, 0.35).unwrap();
    (mean_log + noise.sample(rng)).exp().round() as u64
}

pub fn synthetic_records(n: usize, seed: u64, with_releases: bool) -> Vec<RepositoryRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Normal::new(0.0, 1.0).unwrap();
    (0..n)
        .map(|i| {
            let activity: f64 = z.sample(&mut rng);
            let popularity: f64 = 0.3 * activity + z.sample(&mut rng);
            let created_at = Utc.with_ymd_and_hms(2012, 1, 1, 0, 0, 0).unwrap()
                + Duration::days(rng.gen_range(0..2500));
            let last_commit = created_at + Duration::days(rng.gen_range(120..1800));
            let last_commit = last_commit.min(reference_date() - Duration::days(200));
            let months = ((last_commit - created_at).num_days() as f64 / 30.44).max(1.0);
            let lm = months.ln();

            let total_issues = count(&mut rng, lm + 0.3 + 0.9 * activity).max(1);
            let open_issues = rng.gen_range(0..=total_issues);
            let resolved_issues = rng.gen_range(0..=total_issues - open_issues);
            let total_pull_requests = count(&mut rng, lm - 0.2 + 0.6 * activity).max(1);
            let open_pull_requests = rng.gen_range(0..=total_pull_requests);
            let merged_pull_requests = rng.gen_range(0..=total_pull_requests - open_pull_requests);
            let watchers = count(&mut rng, lm - 0.5 + 0.9 * popularity);
            let releases = count(&mut rng, lm - 1.5 + 0.3 * activity);
            let last_release = (with_releases && releases > 0).then(|| {
                created_at
                    + Duration::days(rng.gen_range(0..=(last_commit - created_at).num_days()))
            });
            RepositoryRecord {
                owner: format!("org{}", i % 17),
                name: format!("project-{i}"),
                created_at,
                last_commit,
                is_fork: i % 23 == 0,
                license_id: "MIT".into(),
                commits: count(&mut rng, lm + 2.0 + 0.5 * activity),
                contributors: count(&mut rng, 1.5 + 0.4 * activity).max(if i % 19 == 0 {
                    0
                } else {
                    3
                }),
                watchers,
                stargazers: count(&mut rng, lm + 1.5 + 0.9 * popularity),
                forks: count(&mut rng, lm + 0.2 + 0.5 * popularity + 0.2 * activity),
                total_issues,
                open_issues,
                total_pull_requests,
                open_pull_requests,
                merged_pull_requests,
                resolved_issues,
                issue_comments: count(&mut rng, lm + 1.2 + 1.0 * activity),
                pr_comments: count(&mut rng, lm + 0.5 + 0.7 * activity),
                branches: count(&mut rng, lm - 1.0 + 0.3 * activity),
                releases,
                last_release,
            }
        })
        .collect()
}

pub fn write_records(dir: &Path, name: &str, records: &[RepositoryRecord]) -> PathBuf {
    let path = dir.join(name);
    let file = std::fs::File::create(&path).unwrap();
    ce_ingest::write_dataset(file, records).unwrap();
    path
}

/// Small-budget configuration for fast test runs.
pub fn test_config(dataset: PathBuf) -> AnalysisConfig {
    AnalysisConfig {
        dataset: Some(dataset),
        reference_date: Some(reference_date()),
        factor_count: Some(2),
        parallel_simulations: 50,
        bootstrap_iterations: 200,
        seed: Some(7),
        ..AnalysisConfig::default()
    }
}
