//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wsn_sim::config::ExperimentSpec;
use wsn_sim::experiment::{metrics_csv, run_experiment, simulate_all, SummaryStats};
use wsn_sim::protocol::{deec_probability, network_average_energy};
use wsn_sim::{
    pairwise_min_distance, run_simulation, Network, NetworkConfig, Node, NodeElectionState, NodeId, Position,
    ProtocolKind, ProtocolSpec, RoundOutcome, ScriptedDraws, SeededStream, Variant,
};

type Verdict = Result<String, String>;
type Criterion<'a> = (&'static str, &'static str, Box<dyn FnOnce() -> Verdict + 'a>);

const SWEEP_SEEDS: u64 = 31;
const SWEEP_BUDGET: Duration = Duration::from_secs(120);
const SEP_MIN_IMPROVEMENT: f64 = 0.25;
const DEEC_SUM_TOL: f64 = 1e-9;
const CONSERVATION_TOL: f64 = 1e-12;
const MIN_CH_DIST: f64 = 12.0;

fn variant(kind: ProtocolKind, ach: bool) -> Variant {
    Variant::new(kind, ach)
}

/// Steps a full run by hand so each round can be audited with the state before it.
fn audit_run(config: &NetworkConfig, mut check: impl FnMut(&[Node], &Network, &RoundOutcome)) {
    let mut rng = SeededStream::new(config.seed);
    let mut net = Network::deploy(config, &mut rng).expect("valid config");
    for round in 0..config.max_rounds {
        if net.alive_count() == 0 {
            break;
        }
        let before = net.nodes().to_vec();
        let out = net.run_round(round, &mut rng);
        check(&before, &net, &out);
    }
}

fn sweep() -> (SummaryStats, Duration) {
    let mut spec = ExperimentSpec { protocols: Variant::all(), ..ExperimentSpec::default() };
    spec.set_seed_range(1, SWEEP_SEEDS);
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    let start = Instant::now();
    let runs = simulate_all(&spec, jobs).expect("sweep runs");
    (SummaryStats::from_runs(runs), start.elapsed())
}

fn c1_stability(stats: &SummaryStats, elapsed: Duration) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = elapsed < SWEEP_BUDGET;
    notes.push(format!("sweep {:.1}s", elapsed.as_secs_f64()));
    for kind in ProtocolKind::ALL {
        let base = stats.stats(variant(kind, false)).unwrap().first_death.median;
        let ach = stats.stats(variant(kind, true)).unwrap().first_death.median;
        ok &= ach > base;
        notes.push(format!("{kind} {base} -> {ach}"));
        if kind == ProtocolKind::Sep {
            let gain = (ach - base) / base;
            ok &= gain >= SEP_MIN_IMPROVEMENT;
            notes.push(format!("SEP gain {:+.1}% (need >= {:.0}%)", gain * 100.0, SEP_MIN_IMPROVEMENT * 100.0));
        }
    }
    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c2_throughput(stats: &SummaryStats) -> Verdict {
    let mut ok = true;
    let mut notes = Vec::new();
    for kind in ProtocolKind::ALL {
        let base = stats.stats(variant(kind, false)).unwrap().packets_to_bs.median;
        let ach = stats.stats(variant(kind, true)).unwrap().packets_to_bs.median;
        ok &= ach > base;
        notes.push(format!("{kind} {base} -> {ach}"));
    }
    let detail = notes.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c3_deec_identity() -> Verdict {
    let spec = ProtocolSpec { kind: ProtocolKind::Deec, ..ProtocolSpec::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=200);
        let energies: Vec<f64> = (0..n).map(|_| rng.gen_range(1e-6..=0.5)).collect();
        let avg = network_average_energy(&energies, n);
        let total: f64 = energies
            .iter()
            .enumerate()
            .map(|(i, &e)| deec_probability(&spec, &NodeElectionState::new(i, e), avg, 0.0, n))
            .sum();
        let target = n as f64 * spec.popt;
        worst = worst.max((total - target).abs() / target);
    }
    let detail = format!("worst relative error {worst:.2e} over 1000 vectors (tol {DEEC_SUM_TOL:e})");
    if worst <= DEEC_SUM_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c4_separation() -> Verdict {
    let mut violations = 0;
    let mut checked = 0;
    for kind in ProtocolKind::ALL {
        for seed in 1..=10 {
            let config = NetworkConfig::default().with_variant(variant(kind, true)).with_seed(seed);
            audit_run(&config, |_, net, out| {
                let heads: Vec<Position> = out.ch_epochs.keys().map(|&id| net.nodes()[id].position).collect();
                if heads.len() >= 2 {
                    checked += 1;
                    if pairwise_min_distance(&heads).unwrap() < MIN_CH_DIST {
                        violations += 1;
                    }
                }
            });
        }
    }
    let detail = format!("{violations} violations in {checked} multi-CH rounds");
    if violations == 0 && checked > 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Charges implied by the round's structure, priced independently of the engine.
fn expected_charges(before: &[Node], out: &RoundOutcome, config: &NetworkConfig) -> Vec<f64> {
    let m = config.energy;
    let k = config.packet_bits;
    let mut charge = vec![0.0; before.len()];
    for (&ch, members) in &out.assignment.clusters {
        for &member in members {
            if out.member_transmitters.contains(&member) {
                charge[member] += m.tx_energy(k, before[member].position.distance_to(&before[ch].position));
            }
        }
    }
    for &member in &out.assignment.direct_to_bs {
        if out.member_transmitters.contains(&member) {
            charge[member] += m.tx_energy(k, before[member].position.distance_to(&config.bs_position));
        }
    }
    for (&ch, members) in &out.assignment.clusters {
        let got = members.iter().filter(|id| out.member_transmitters.contains(id)).count() as u64;
        charge[ch] += m.rx_energy(k) * got as f64;
        if let Some(&signals) = out.ch_uplinks.get(&ch) {
            charge[ch] += m.aggregation_energy(k, signals);
            charge[ch] += m.tx_energy(k, before[ch].position.distance_to(&config.bs_position));
        }
    }
    charge
}

fn c5_conservation() -> Verdict {
    let mut worst = 0.0f64;
    let mut rounds = 0;
    for v in Variant::all() {
        for seed in 1..=5 {
            let config = NetworkConfig::default().with_variant(v).with_seed(seed);
            audit_run(&config, |before, net, out| {
                let charges = expected_charges(before, out, &config);
                let dissipated: f64 = before.iter().zip(&charges).map(|(n, &c)| c.min(n.energy())).sum();
                let delta: f64 = before.iter().zip(net.nodes()).map(|(b, a)| b.energy() - a.energy()).sum();
                if dissipated > 0.0 {
                    worst = worst.max((delta - dissipated).abs() / dissipated);
                }
                rounds += 1;
            });
        }
    }
    let detail = format!("worst relative error {worst:.2e} over {rounds} rounds (tol {CONSERVATION_TOL:e})");
    if worst <= CONSERVATION_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c6_epoch_honor() -> Verdict {
    let mut violations = 0;
    let mut terms = 0;
    for v in Variant::all() {
        for seed in 1..=10 {
            let config = NetworkConfig::default().with_variant(v).with_seed(seed);
            let mut last: BTreeMap<NodeId, u64> = BTreeMap::new();
            audit_run(&config, |_, _, out| {
                let round = out.metrics.round;
                for (&id, &epoch) in &out.ch_epochs {
                    terms += 1;
                    if let Some(prev) = last.insert(id, round) {
                        if round - prev < epoch {
                            violations += 1;
                        }
                    }
                }
            });
        }
    }
    let detail = format!("{violations} early re-elections in {terms} CH terms");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// --- criterion 7: brute-force ledger for a 4-node network -------------------

struct TinyNode {
    pos: (f64, f64),
    energy: f64,
    last_ch: Option<u64>,
}

/// Plain re-derivation of one LEACH round: threshold, draws, ACH, nearest CH,
/// radio charges. Returns the per-node energies after the round.
fn oracle_round(nodes: &mut [TinyNode], round: u64, draws: &[f64], ach: bool) {
    let (e_elec, eps_fs, eps_mp, e_da): (f64, f64, f64, f64) = (50e-9, 10e-12, 0.0013e-12, 5e-9);
    let k = 4000.0;
    let d0 = (eps_fs / eps_mp).sqrt();
    let tx = |d: f64| if d < d0 { e_elec * k + eps_fs * k * d * d } else { e_elec * k + eps_mp * k * d.powi(4) };
    let dist = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0).hypot(a.1 - b.1);
    let bs = (50.0, 50.0);
    let p = 0.05;
    let period = 20u64;

    let alive: Vec<usize> = (0..nodes.len()).filter(|&i| nodes[i].energy > 0.0).collect();
    let mut cands = Vec::new();
    for (j, &i) in alive.iter().enumerate() {
        let eligible = nodes[i].last_ch.is_none_or(|l| round - l >= period);
        let phase = (round % period) as f64;
        let t = if !eligible {
            0.0
        } else if 1.0 - p * phase <= p * (1.0 + 1e-9) {
            1.0
        } else {
            p / (1.0 - p * phase)
        };
        if draws[j] < t {
            cands.push(i);
        }
    }
    let mut heads: Vec<usize> = Vec::new();
    if ach {
        let mut order = cands.clone();
        order.sort_by(|&a, &b| nodes[b].energy.partial_cmp(&nodes[a].energy).unwrap().then(a.cmp(&b)));
        for c in order {
            if heads.iter().all(|&h| dist(nodes[h].pos, nodes[c].pos) >= 12.0) {
                heads.push(c);
            }
        }
    } else {
        heads = cands;
    }
    heads.sort();
    for &h in &heads {
        nodes[h].last_ch = Some(round);
    }

    let mut charge = vec![0.0; nodes.len()];
    let mut got = vec![0u32; nodes.len()];
    for &i in &alive {
        if heads.contains(&i) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &h in &heads {
            let d = dist(nodes[i].pos, nodes[h].pos);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((h, d));
            }
        }
        match best {
            Some((h, d)) => {
                charge[i] += tx(d);
                got[h] += 1;
            }
            None => charge[i] += tx(dist(nodes[i].pos, bs)),
        }
    }
    for &h in &heads {
        charge[h] += e_elec * k * got[h] as f64;
        charge[h] += e_da * k * (got[h] + 1) as f64;
        charge[h] += tx(dist(nodes[h].pos, bs));
    }
    for (n, c) in nodes.iter_mut().zip(charge) {
        if c > 0.0 {
            n.energy = (n.energy - c).max(0.0);
        }
    }
}

fn c7_oracle_ledger() -> Verdict {
    let placed = [(50.0, 20.0), (56.0, 28.0), (90.0, 90.0), (10.0, 60.0)];
    // per round: four election draws then four sensing draws
    let script: [[f64; 4]; 3] = [[0.01, 0.02, 0.9, 0.9], [0.5, 0.03, 0.5, 0.5], [0.9, 0.9, 0.9, 0.9]];
    let mut mismatches = Vec::new();
    for ach in [false, true] {
        let mut config = NetworkConfig::default();
        config.protocol.ach_enabled = ach;
        let nodes: Vec<Node> =
            placed.iter().enumerate().map(|(i, &(x, y))| Node::new(i, Position::new(x, y), 0.25)).collect();
        let mut net = Network::from_nodes(config, nodes).unwrap();
        let mut tiny: Vec<TinyNode> = placed.iter().map(|&pos| TinyNode { pos, energy: 0.25, last_ch: None }).collect();
        let draws: Vec<f64> = script.iter().flat_map(|d| d.iter().chain([0.5; 4].iter()).copied()).collect();
        let mut stream = ScriptedDraws::new(draws);
        for (round, d) in script.iter().enumerate() {
            net.run_round(round as u64, &mut stream);
            oracle_round(&mut tiny, round as u64, d, ach);
            for (i, t) in tiny.iter().enumerate() {
                let got = net.nodes()[i].energy();
                if got != t.energy {
                    mismatches.push(format!("ach={ach} round {round} node {i}: {got} vs {}", t.energy));
                }
            }
        }
    }
    // The scenario must actually exercise demotion: nodes 0 and 1 are 10 m apart.
    let spread = (50.0f64 - 56.0).hypot(20.0 - 28.0);
    if mismatches.is_empty() && spread < MIN_CH_DIST {
        Ok("LEACH and LEACH-ACH ledgers match bit-for-bit over 3 rounds".into())
    } else {
        Err(mismatches.join("; "))
    }
}

fn c8_teen_traffic() -> Verdict {
    let mut violations = 0;
    for seed in 1..=10 {
        let leach =
            run_simulation(&NetworkConfig::default().with_variant(variant(ProtocolKind::Leach, false)).with_seed(seed))
                .unwrap();
        let teen =
            run_simulation(&NetworkConfig::default().with_variant(variant(ProtocolKind::Teen, false)).with_seed(seed))
                .unwrap();
        let len = leach.metrics.len().max(teen.metrics.len());
        for r in 0..len {
            let l = leach.metrics[r.min(leach.metrics.len() - 1)].packets_to_ch_cum;
            let t = teen.metrics[r.min(teen.metrics.len() - 1)].packets_to_ch_cum;
            if t > l {
                violations += 1;
            }
        }
    }
    let detail = format!("{violations} rounds where TEEN member traffic exceeded LEACH, 10 seeds");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c9_determinism() -> Verdict {
    let mut spec = ExperimentSpec { protocols: Variant::all(), ..ExperimentSpec::default() };
    spec.set_seed_range(7, 2);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&spec, a.path(), 4).map_err(|e| e.to_string())?;
    run_experiment(&spec, b.path(), 1).map_err(|e| e.to_string())?;
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path().join("runs")).unwrap() {
        let path = entry.unwrap().path();
        let other = b.path().join("runs").join(path.file_name().unwrap());
        if std::fs::read(&path).unwrap() != std::fs::read(&other).unwrap() {
            return Err(format!("{} differs between runs", path.display()));
        }
        compared += 1;
    }
    let summary_same =
        std::fs::read(a.path().join("summary.csv")).unwrap() == std::fs::read(b.path().join("summary.csv")).unwrap();
    let config = NetworkConfig::default().with_seed(99);
    let direct_same = metrics_csv(&run_simulation(&config).unwrap().metrics)
        == metrics_csv(&run_simulation(&config).unwrap().metrics);
    if compared == 16 && summary_same && direct_same {
        Ok(format!("{compared} run CSVs and summary byte-identical across repeated runs"))
    } else {
        Err(format!("compared {compared}, summary identical {summary_same}, direct identical {direct_same}"))
    }
}

fn main() {
    let started = Instant::now();
    let (stats, elapsed) = sweep();
    let criteria: Vec<Criterion> = vec![
        ("C1", "ACH lengthens stability period (31 seeds, SEP >= +25%)", Box::new(|| c1_stability(&stats, elapsed))),
        ("C2", "ACH raises packets to BS at network death", Box::new(|| c2_throughput(&stats))),
        ("C3", "homogeneous DEEC probabilities sum to N*popt", Box::new(c3_deec_identity)),
        ("C4", "confirmed CHs at least 12 m apart", Box::new(c4_separation)),
        ("C5", "per-round energy conservation", Box::new(c5_conservation)),
        ("C6", "no CH re-elected within its epoch", Box::new(c6_epoch_honor)),
        ("C7", "4-node engine ledger equals brute-force ledger", Box::new(c7_oracle_ledger)),
        ("C8", "TEEN member traffic never exceeds LEACH", Box::new(c8_teen_traffic)),
        ("C9", "repeated runs give byte-identical CSVs", Box::new(c9_determinism)),
    ];

    let mut out = std::io::stdout().lock();
    let mut failed = 0;
    for (id, title, check) in criteria {
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        let _ = writeln!(out, "[{tag}] {id} {title}: {detail}");
    }
    let _ = writeln!(out, "acceptance: {failed} failed, {:.1}s", started.elapsed().as_secs_f64());
    let _ = out.flush();
    if failed > 0 {
        std::process::exit(1);
    }
}
