//! Running the experiment matrix.

use std::io::Write;

use irpft::lightdark::LightDark;
use irpft::seeding::{derive, stream_rng, Stream};
use irpft::{solve_loop, CandidatePool, Planner, SimulatedEnv};

use crate::config::ExperimentConfig;
use crate::results::{write_row, EpisodeRow, Header, Results, Row, SessionRow, SCHEMA};
use crate::Result;

/// Seed of one episode. Both planners see the same seed for the same
/// `(m, episode)`, so their start states and first observations are paired.
pub fn episode_seed(base: u64, particles: usize, episode: u32) -> u64 {
    derive(derive(base, particles as u64), u64::from(episode))
}

/// Run one episode and return its session rows and episode row.
pub fn run_episode(
    cfg: &ExperimentConfig,
    model: &LightDark,
    planner: Planner,
    particles: usize,
    episode: u32,
) -> (Vec<SessionRow>, EpisodeRow) {
    let seed = episode_seed(cfg.experiment.seed, particles, episode);
    let mut init = stream_rng(seed, Stream::Initial);
    let start = model.sample_start(&mut init);
    let b0 = model.initial_belief(particles, &mut init);
    let mut env = SimulatedEnv::new(model, start, stream_rng(seed, Stream::Environment));
    let mut plan_rng = stream_rng(seed, Stream::Planner);
    let mut filter_rng = stream_rng(seed, Stream::Filter);
    let mut pool = CandidatePool::new();
    let trace = solve_loop(
        &b0,
        &mut pool,
        &cfg.planner,
        model,
        &mut env,
        planner,
        model.config().max_steps,
        &mut plan_rng,
        &mut filter_rng,
    );
    let sessions: Vec<SessionRow> = trace
        .steps
        .iter()
        .enumerate()
        .map(|(step, s)| SessionRow {
            planner,
            particles,
            episode,
            step: step as u32,
            seed,
            plan_ms: s.plan_nanos as f64 / 1e6,
            reward_calls: s.stats.reward_calls,
            simulations: s.stats.simulations,
            counter: s.stats.counter,
            reused: s.stats.reused,
            reused_visits: s.stats.reused_visits,
            fill_nodes: s.stats.fill_nodes,
            density_evals: s.stats.density_evals,
            candidates: s.candidates,
            reward: s.reward,
        })
        .collect();
    let mean_plan_ms = if sessions.is_empty() {
        0.0
    } else {
        sessions.iter().map(|s| s.plan_ms).sum::<f64>() / sessions.len() as f64
    };
    let row = EpisodeRow {
        planner,
        particles,
        episode,
        seed,
        steps: trace.steps.len() as u32,
        total_reward: trace.total_reward,
        reached_goal: trace.reached_terminal,
        mean_plan_ms,
    };
    (sessions, row)
}

/// Run every (m, episode, planner) combination, streaming rows to `out`, and
/// finish with the aggregate block.
///
/// Planners alternate within each episode index so slow drifts of the machine
/// affect both planners alike.
pub fn run_matrix<W: Write>(
    cfg: &ExperimentConfig,
    out: &mut W,
    mut progress: impl FnMut(&EpisodeRow),
) -> Result<Results> {
    cfg.validate()?;
    let model = LightDark::new(cfg.environment.clone())
        .map_err(|e| crate::BenchError::Config(format!("environment: {e}")))?;
    let mut results = Results::default();
    let header = Row::Header(Header {
        schema: SCHEMA.to_string(),
        config: cfg.clone(),
    });
    write_row(out, &header)?;
    results.push(header);
    for &m in &cfg.experiment.particles {
        for episode in 0..cfg.experiment.episodes {
            for &planner in &cfg.experiment.planners {
                let (sessions, row) = run_episode(cfg, &model, planner, m, episode);
                for s in sessions {
                    let r = Row::Session(s);
                    write_row(out, &r)?;
                    results.push(r);
                }
                progress(&row);
                let r = Row::Episode(row);
                write_row(out, &r)?;
                results.push(r);
            }
        }
    }
    let (aggregates, speedups) = results.compute_aggregates();
    for a in aggregates {
        let r = Row::Aggregate(a);
        write_row(out, &r)?;
        results.push(r);
    }
    for s in speedups {
        let r = Row::Speedup(s);
        write_row(out, &r)?;
        results.push(r);
    }
    out.flush()?;
    Ok(results)
}
