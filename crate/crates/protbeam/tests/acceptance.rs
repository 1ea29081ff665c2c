//! End-to-end acceptance checks. Runs without the libtest harness so every
//! criterion prints one line; the process fails if any of them does.

mod common;
#[path = "../../core/tests/common/mod.rs"]
mod oracle;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use oracle::{brute_pareto, grid_pi, naive_double_mask, naive_exact_pll, random_sequence};
use protbeam_core::exec::Sequential;
use protbeam_core::guidance::{nds_fronts, orient_and_zscore, sts_scalarize, Direction, ScoreMatrix};
use protbeam_core::metrics::{
    germline_delta, isoelectric_point, liability_scan, pairwise_diversity, DiversityMode, FrequencyTable, PkaSet,
};
use protbeam_core::pll::{
    approx_pll_double_mask, build_profile, exact_pll, score_neighborhood, Approximation, DoubleMaskTerms,
};
use protbeam_core::provider::Metered;
use protbeam_core::samplers::{
    batch_generate, beam_search, BeamConfig, Decode, GenerationRun, MutationSamplerConfig, SamplerConfig, SeedInput,
};
use protbeam_core::seq::hamming;
use protbeam_core::{CandidateSequence, CoupledProvider, PositionMask, PssmProvider, Residue};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn other_residue(rng: &mut ChaCha8Rng, current: Residue) -> Residue {
    loop {
        let r = Residue::from_index(rng.gen_range(0..20)).unwrap();
        if r != current {
            return r;
        }
    }
}

fn equivalence_collapse() -> Outcome {
    let p = PssmProvider::random(12, 2024, 3.0);
    let template = random_sequence(&mut rng(1), 12);
    let mask = PositionMask::full(12);
    let scores: Vec<Vec<f64>> = Approximation::ALL
        .iter()
        .map(|&a| {
            let rows = score_neighborhood(&p, &template, &mask, 1.0, a).map_err(|e| e.to_string())?;
            Ok(rows.iter().map(|r| r.score.sum_log).collect())
        })
        .collect::<Result<_, String>>()?;
    ensure(scores[0].len() == 228, || format!("{} children", scores[0].len()))?;
    let mut worst = 0.0f64;
    for a in &scores {
        for b in &scores {
            for (x, y) in a.iter().zip(b) {
                worst = worst.max((x - y).abs());
            }
        }
    }
    ensure(worst <= 1e-9, || format!("max pairwise gap {worst:e}"))?;
    Ok(format!("228 children, max pairwise gap {worst:.1e}"))
}

fn oracle_exactness() -> Outcome {
    let mut r = rng(2);
    let mut worst_exact = 0.0f64;
    let mut worst_double = 0.0f64;
    for i in 0..100u64 {
        let p = CoupledProvider::random(4, 100 + i, Default::default());
        let s = random_sequence(&mut r, 4);
        let tau = r.gen_range(0.5..2.5);
        let exact = exact_pll(&p, &s, tau).map_err(|e| e.to_string())?.sum_log;
        worst_exact = worst_exact.max((exact - naive_exact_pll(&p, &s, tau)).abs());

        let k = r.gen_range(0..4);
        let to = other_residue(&mut r, s.residues()[k]);
        let child = s.substituted(k, to).unwrap();
        let profile = build_profile(&p, &s, tau).map_err(|e| e.to_string())?;
        let dm = approx_pll_double_mask(&p, &profile, &child).map_err(|e| e.to_string())?.sum_log;
        worst_double = worst_double.max((dm - naive_double_mask(&p, &s, k, to, tau)).abs());
    }
    ensure(worst_exact <= 1e-12 && worst_double <= 1e-12, || {
        format!("exact gap {worst_exact:e}, double-mask gap {worst_double:e}")
    })?;
    Ok(format!("100 sequences, exact gap {worst_exact:.1e}, double-mask gap {worst_double:.1e}"))
}

fn cost_ledger() -> Outcome {
    const L: u64 = 50;
    let p = PssmProvider::zeros(L as usize);
    let template = random_sequence(&mut rng(3), L as usize);
    let mask = PositionMask::full(L as usize);
    let expected = [
        (Approximation::Exact, 19 * L * L + L),
        (Approximation::DoubleMask, L + L * (L - 1) / 2),
        (Approximation::WildType, L),
        (Approximation::NomaskChild, 19 * L),
        (Approximation::NomaskTemplate, 1),
    ];
    let mut got = Vec::new();
    for (a, want) in expected {
        let m = Metered::new(&p);
        score_neighborhood(&m, &template, &mask, 1.0, a).map_err(|e| e.to_string())?;
        ensure(m.passes() == want, || format!("{a}: {} passes, expected {want}", m.passes()))?;
        got.push(m.passes());
    }
    for k in 0..L as usize {
        let m = Metered::new(&p);
        DoubleMaskTerms::compute(&m, &template, k, 1.0).map_err(|e| e.to_string())?;
        ensure(m.passes() == L - 1, || format!("double-mask site {k}: {} passes", m.passes()))?;
    }
    // cost classes, cheapest first: template-only, then per-position, then per-child-per-position
    let [exact, double, wt, child, template_only] = got[..] else { unreachable!() };
    ensure(template_only < wt.min(child), || "template-only pass is not the cheapest".into())?;
    ensure(wt.max(child) < exact.min(double), || "linear-pass routes overlap quadratic ones".into())?;
    ensure(exact > double, || "exact is not the most expensive".into())?;
    Ok(format!("exact {exact}, double-mask {double}, wt {wt}, nomask-child {child}, nomask-template {template_only}"))
}

fn beam_pass_count() -> Outcome {
    let (l, b, e) = (100u64, 5usize, 4usize);
    let p = PssmProvider::zeros(l as usize);
    let seed = random_sequence(&mut rng(4), l as usize);
    let mut cfg = BeamConfig::new(e, PositionMask::full(l as usize));
    cfg.beam_size = b;
    let m = Metered::new(&p);
    let run = beam_search(&m, "s", &seed, &cfg, None).map_err(|e| e.to_string())?;
    let want = l * (1 + b as u64 * (e as u64 - 1));
    ensure(m.passes() == want && run.forward_passes == want, || {
        format!("{} metered, {} reported, expected {want}", m.passes(), run.forward_passes)
    })?;
    Ok(format!("{want} passes"))
}

fn random_mask(r: &mut ChaCha8Rng, len: usize, min: usize) -> PositionMask {
    let mut positions: Vec<usize> = (0..len).collect();
    positions.shuffle(r);
    let size = r.gen_range(min..=len);
    positions.into_iter().take(size).collect()
}

fn sampler_config(kind: usize, edits: usize, mask: PositionMask, rng_seed: u64) -> SamplerConfig {
    if kind == 0 {
        let mut c = BeamConfig::new(edits, mask);
        c.rng_seed = rng_seed;
        return SamplerConfig::Beam(c);
    }
    let mut c = MutationSamplerConfig::new(edits, mask);
    c.rng_seed = rng_seed;
    match kind {
        1 => SamplerConfig::Gibbs(c),
        2 => {
            c.decode = Decode::Argmax;
            SamplerConfig::Gibbs(c)
        }
        _ => SamplerConfig::Denoise(c),
    }
}

fn exactly_e() -> Outcome {
    const L: usize = 20;
    const E: usize = 3;
    let p = CoupledProvider::random(L, 5, Default::default());
    let mut r = rng(5);
    let mut checked = 0;
    for kind in 0..4 {
        let mut produced = 0;
        let mut round = 0u64;
        while produced < 250 {
            let mask = random_mask(&mut r, L, 8);
            let seed = random_sequence(&mut r, L);
            let cfg = sampler_config(kind, E, mask.clone(), round);
            let want = (250 - produced).min(25);
            let run = batch_generate(&p, &[SeedInput::new("s", seed.clone())], want, &cfg, None, &Sequential)
                .map_err(|e| e.to_string())?;
            for out in run.outputs.iter().take(want) {
                let c = &out.candidate;
                let d = hamming(&seed, c.sequence()).unwrap();
                ensure(d == E, || format!("sampler {kind}: distance {d}"))?;
                ensure(c.edits().iter().all(|e| mask.contains(e.position)), || {
                    format!("sampler {kind}: edit outside mask")
                })?;
                produced += 1;
            }
            round += 1;
        }
        checked += produced;
    }
    Ok(format!("{checked} outputs, all at distance {E} inside their masks"))
}

struct TrendRun {
    beam_pll: f64,
    gibbs_pll: f64,
    beam_div: f64,
    gibbs_div: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pool_stats(p: &CoupledProvider, run: &GenerationRun) -> Result<(f64, f64), String> {
    let kids: Vec<CandidateSequence> = run.outputs.iter().map(|o| o.candidate.clone()).collect();
    if kids.len() != 100 {
        return Err(format!("{} outputs instead of 100", kids.len()));
    }
    let pll = kids
        .iter()
        .map(|c| exact_pll(p, c.sequence(), 1.0).map(|s| s.sum_log))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let div = pairwise_diversity(&kids, DiversityMode::IntraSeed).map_err(|e| e.to_string())?;
    let div: Vec<f64> = div.into_iter().map(Option::unwrap).collect();
    Ok((mean(&pll), mean(&div)))
}

fn trend_runs() -> Result<Vec<TrendRun>, String> {
    const L: usize = 20;
    (0..5u64)
        .map(|s| {
            let p = CoupledProvider::random(L, 600 + s, Default::default());
            let seed = SeedInput::new("s", random_sequence(&mut rng(600 + s), L));
            let mask = PositionMask::full(L);
            let mut beam = BeamConfig::new(3, mask.clone());
            beam.tau = 1.5;
            beam.gumbel_scale = 1.0;
            beam.rng_seed = s;
            let mut gibbs = MutationSamplerConfig::new(3, mask);
            gibbs.tau = 1.5;
            gibbs.rng_seed = s;
            let b = batch_generate(&p, std::slice::from_ref(&seed), 100, &SamplerConfig::Beam(beam), None, &Sequential)
                .map_err(|e| e.to_string())?;
            let g = batch_generate(&p, std::slice::from_ref(&seed), 100, &SamplerConfig::Gibbs(gibbs), None, &Sequential)
                .map_err(|e| e.to_string())?;
            let (beam_pll, beam_div) = pool_stats(&p, &b)?;
            let (gibbs_pll, gibbs_div) = pool_stats(&p, &g)?;
            Ok(TrendRun {
                beam_pll,
                gibbs_pll,
                beam_div,
                gibbs_div,
            })
        })
        .collect()
}

fn beam_beats_gibbs(runs: &[TrendRun]) -> Outcome {
    let wins = runs.iter().filter(|r| r.beam_pll > r.gibbs_pll).count();
    let detail: Vec<String> = runs.iter().map(|r| format!("{:.2}/{:.2}", r.beam_pll, r.gibbs_pll)).collect();
    ensure(wins == 5, || format!("beam ahead on {wins}/5 seeds (beam/gibbs: {})", detail.join(" ")))?;
    Ok(format!("5/5 seeds, mean PLL beam/gibbs {}", detail.join(" ")))
}

fn beam_less_diverse(runs: &[TrendRun]) -> Outcome {
    let wins = runs.iter().filter(|r| r.beam_div <= r.gibbs_div).count();
    let detail: Vec<String> = runs.iter().map(|r| format!("{:.2}/{:.2}", r.beam_div, r.gibbs_div)).collect();
    ensure(wins == 5, || format!("beam no more diverse on {wins}/5 seeds (beam/gibbs: {})", detail.join(" ")))?;
    Ok(format!("5/5 seeds, diversity beam/gibbs {}", detail.join(" ")))
}

fn ascending(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    idx
}

fn guidance_sanity() -> Outcome {
    let mut r = rng(8);
    for case in 0..200 {
        let n = r.gen_range(1..=64);
        let m = r.gen_range(1..=4);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| r.gen_range(0..6) as f64).collect()).collect();
        let fronts = nds_fronts(&rows);
        let front0: Vec<usize> = (0..n).filter(|&i| fronts[i] == 0).collect();
        ensure(front0 == brute_pareto(&rows), || format!("NDS instance {case} disagrees with brute force"))?;
    }
    for case in 0..200 {
        let n = r.gen_range(2..=64);
        let dir = if r.gen_bool(0.5) { Direction::Minimize } else { Direction::Maximize };
        let raw: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-100.0..100.0)]).collect();
        let matrix = orient_and_zscore(raw, &[dir]).map_err(|e| e.to_string())?;
        let z: Vec<f64> = matrix.standardized.iter().map(|row| row[0]).collect();
        let s = sts_scalarize(&matrix, &[r.gen_range(0.1..5.0)]).map_err(|e| e.to_string())?;
        ensure(ascending(&s) == ascending(&z), || format!("STS instance {case} reorders the z-scores"))?;
    }
    let hand = vec![vec![0.0, -1.0], vec![-1.0, 0.0]];
    let matrix = ScoreMatrix {
        raw: hand.clone(),
        oriented: hand.clone(),
        standardized: hand,
    };
    let s = sts_scalarize(&matrix, &[1.0, 2.0]).map_err(|e| e.to_string())?;
    ensure((s[0] - 0.549).abs() < 5e-3 && (s[1] - 0.861).abs() < 5e-3 && s[0] < s[1], || {
        format!("weighted STS gave {:.4} and {:.4}", s[0], s[1])
    })?;
    Ok(format!("200 NDS + 200 STS instances, weighted pair {:.4} < {:.4}", s[0], s[1]))
}

fn metrics_oracles() -> Outcome {
    let mut r = rng(9);
    let pka = PkaSet::default();
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = r.gen_range(1..=50);
        let s = random_sequence(&mut r, len);
        worst = worst.max((isoelectric_point(&s, &pka) - grid_pi(&s.to_code_string())).abs());
    }
    ensure(worst <= 2e-3, || format!("pI gap {worst:e}"))?;
    for _ in 0..1000 {
        let len = r.gen_range(1..=60);
        let s = random_sequence(&mut r, len);
        let report = liability_scan(&s, &s).map_err(|e| e.to_string())?;
        ensure(report.is_empty(), || format!("{s} introduces liabilities against itself"))?;
    }
    let mut worst_delta = 0.0f64;
    for _ in 0..200 {
        let len = r.gen_range(2..=30);
        let s = random_sequence(&mut r, len);
        let mut table = FrequencyTable::new();
        for p in 0..len {
            let mut row = [0.0; 20];
            row.iter_mut().for_each(|v| *v = r.gen_range(0.0..0.05));
            table.insert(p, row).unwrap();
        }
        let count = r.gen_range(1..=len.min(6));
        let mut positions: Vec<usize> = (0..len).collect();
        positions.shuffle(&mut r);
        let positions: BTreeSet<usize> = positions.into_iter().take(count).collect();
        let mut child = CandidateSequence::from_seed("s", s.clone());
        for &p in &positions {
            let to = other_residue(&mut r, s.residues()[p]);
            child = child.apply_edit(p, to).unwrap();
        }
        let back = CandidateSequence::from_variant("s", child.sequence(), s.clone()).unwrap();
        let sum = germline_delta(&child, &table).unwrap() + germline_delta(&back, &table).unwrap();
        worst_delta = worst_delta.max(sum.abs());
    }
    ensure(worst_delta < 1e-12, || format!("germline delta asymmetry {worst_delta:e}"))?;
    Ok(format!("pI gap {worst:.1e}, 1000 clean self-scans, antisymmetry gap {worst_delta:.1e}"))
}

fn cli_determinism() -> Outcome {
    use common::{protbeam, read_bytes, write};
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    write(d, "seeds.fa", ">s1\nMKTAYIAKQRQISFVKSHFS\n>s2\nEVQLVESGGGLVQPGGSLRL\n");
    write(
        d,
        "obj.json",
        r#"[{"name": "pi", "direction": "minimize", "scorer": {"kind": "builtin_pi"}},
            {"name": "liab", "direction": "minimize", "scorer": {"kind": "builtin_liability_count"}}]"#,
    );
    let provider = "coupled-random:20:7";
    let mut outputs: Vec<String> = Vec::new();
    let run = |args: Vec<String>| -> Result<(), String> {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        let o = protbeam(d, &refs);
        ensure(o.code == 0, || format!("{args:?} exited {}: {}", o.code, o.stderr))
    };
    let mut tags = Vec::new();
    for threads in ["1", "8"] {
        for rep in ["a", "b"] {
            let tag = format!("{threads}{rep}");
            let a = |s: &str| s.to_string();
            for sampler in ["beam", "gibbs", "gibbs-argmax", "denoise"] {
                run([
                    "generate", "--sampler", sampler, "--seeds", "seeds.fa", "--edits", "3", "--count", "20",
                    "--provider", provider, "--rng-seed", "11", "--threads", threads,
                ]
                .iter()
                .map(|s| a(s))
                .chain(["--out".into(), format!("g-{sampler}-{tag}")])
                .collect())?;
            }
            let g = format!("g-beam-{tag}.tsv");
            run(vec![
                a("score"), a("--seeds"), a("seeds.fa"), a("--candidates"), g.clone(), a("--approximation"), a("exact"),
                a("--approximation"), a("nomask-child"), a("--provider"), a(provider), a("--threads"), a(threads), a("--out"), format!("sc-{tag}"),
            ])?;
            run(vec![
                a("score"), a("--seeds"), a("seeds.fa"), a("--provider"), a(provider), a("--threads"), a(threads),
                a("--out"), format!("nb-{tag}"),
            ])?;
            run(vec![
                a("rank"), a("--candidates"), g.clone(), a("--objectives"), a("obj.json"), a("--aggregation"), a("sts"),
                a("--threads"), a(threads), a("--out"), format!("rk-{tag}"),
            ])?;
            run(vec![
                a("filter"), a("--candidates"), g.clone(), a("--seeds"), a("seeds.fa"), a("--max-pi"), a("9"),
                a("--exclude-liabilities"), a("all"), a("--threads"), a(threads), a("--out"), format!("fl-{tag}"),
            ])?;
            run(vec![
                a("metrics"), a("--candidates"), g, a("--seeds"), a("seeds.fa"), a("--threads"), a(threads),
                a("--out"), format!("mt-{tag}"),
            ])?;
            tags.push(tag);
        }
    }
    for sampler in ["beam", "gibbs", "gibbs-argmax", "denoise"] {
        outputs.push(format!("g-{sampler}-{{}}.tsv"));
        outputs.push(format!("g-{sampler}-{{}}.fasta"));
    }
    for f in ["sc-{}.tsv", "nb-{}.tsv", "rk-{}.tsv", "fl-{}.tsv", "fl-{}.rejections.tsv", "mt-{}.tsv", "mt-{}.liabilities.json"] {
        outputs.push(f.to_string());
    }
    for f in &outputs {
        let reference = read_bytes(d, &f.replace("{}", &tags[0]));
        for tag in &tags[1..] {
            ensure(read_bytes(d, &f.replace("{}", tag)) == reference, || format!("{f} differs for run {tag}"))?;
        }
    }
    Ok(format!("{} output files identical over 2 runs at 1 and 8 threads", outputs.len()))
}

struct Criterion {
    number: usize,
    name: &'static str,
    limit: Duration,
}

fn report(c: &Criterion, elapsed: Duration, outcome: &Outcome) -> bool {
    let within = elapsed <= c.limit;
    let pass = outcome.is_ok() && within;
    let detail = match outcome {
        Ok(s) => s.clone(),
        Err(s) => s.clone(),
    };
    let timing = format!("{:.2}s of {}s", elapsed.as_secs_f64(), c.limit.as_secs());
    println!(
        "criterion {:>2} {:<28} {}  [{timing}{}] {detail}",
        c.number,
        c.name,
        if pass { "PASS" } else { "FAIL" },
        if within { "" } else { ", over time" },
    );
    pass
}

fn main() {
    let secs = Duration::from_secs;
    let criteria: Vec<(Criterion, Box<dyn Fn() -> Outcome>)> = vec![
        (Criterion { number: 1, name: "equivalence collapse", limit: secs(1) }, Box::new(equivalence_collapse)),
        (Criterion { number: 2, name: "oracle exactness", limit: secs(5) }, Box::new(oracle_exactness)),
        (Criterion { number: 3, name: "cost ledger", limit: secs(10) }, Box::new(cost_ledger)),
        (Criterion { number: 4, name: "beam pass count", limit: secs(5) }, Box::new(beam_pass_count)),
        (Criterion { number: 5, name: "exactly-E contract", limit: secs(30) }, Box::new(exactly_e)),
    ];
    let mut all = true;
    for (c, f) in &criteria {
        let start = Instant::now();
        let outcome = f();
        all &= report(c, start.elapsed(), &outcome);
    }

    // criteria 6 and 7 share their sampler runs
    let start = Instant::now();
    let runs = trend_runs();
    let shared = start.elapsed();
    let trend = [
        (Criterion { number: 6, name: "beam beats gibbs", limit: secs(120) }, beam_beats_gibbs as fn(&[TrendRun]) -> Outcome),
        (Criterion { number: 7, name: "beam less diverse", limit: secs(120) }, beam_less_diverse),
    ];
    for (c, f) in trend {
        let start = Instant::now();
        let outcome = runs.as_deref().map_err(Clone::clone).and_then(f);
        all &= report(&c, shared + start.elapsed(), &outcome);
    }

    let rest: Vec<(Criterion, fn() -> Outcome)> = vec![
        (Criterion { number: 8, name: "guidance sanity", limit: secs(10) }, guidance_sanity),
        (Criterion { number: 9, name: "metrics oracles", limit: secs(30) }, metrics_oracles),
        (Criterion { number: 10, name: "determinism", limit: secs(60) }, cli_determinism),
    ];
    for (c, f) in &rest {
        let start = Instant::now();
        let outcome = f();
        all &= report(c, start.elapsed(), &outcome);
    }
    if !all {
        std::process::exit(1);
    }
}
