#![allow(dead_code)]

use adaft::runner::report::CellStats;
use adaft::runner::Approach;
use adaft::schedule::{schedule_trace, CooldownShape, EpochDecision, ScheduleConfig, ScheduleMode};
use adaft::stats::{notation, Summary};
use adaft::toytrainer::{EncodedSentence, TaggerModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub const N_RUNS: usize = 5;

/// Published multi-seed results: corpus, x, then cv and f1 for original and
/// stable, cv, f1 and epochs for adaptive. `_` means all runs converged.
pub const PUBLISHED_RESULTS: &str = "
I 0.005 0 --- _ 0.3267(249) _ 0.6112(97) 49.4(1.9)
I 0.01 2 --- _ 0.6080(87) _ 0.7566(44) 35.2(3.0)
I 0.015 _ 0.0762(256) _ 0.7483(95) _ 0.8145(12) 25.2(1.1)
I 0.02 _ 0.3377(295) _ 0.8270(28) _ 0.8389(28) 22.6(7)
I 0.05 _ 0.7846(116) _ 0.8804(17) _ 0.8838(14) 17.6(1.2)
I 0.1 _ 0.8801(22) _ 0.8937(12) _ 0.8942(1) 15.4(7)
I 0.2 _ 0.9000(8) _ 0.9066(2) _ 0.9063(4) 13.4(9)
I 0.4 _ 0.9096(7) _ 0.9118(11) _ 0.9111(6) 11.2(2)
I 0.6 _ 0.9136(9) _ 0.9157(7) _ 0.9155(9) 11.6(5)
I 0.8 _ 0.9169(5) _ 0.9202(4) _ 0.9201(4) 11.4(4)
I 1.0 _ 0.9175(5) _ 0.9195(7) _ 0.9214(8) 11.2(2)
II 0.005 0 --- _ 0.1987(263) _ 0.6631(72) 42.8(2.9)
II 0.01 0 --- _ 0.5923(6) _ 0.7404(46) 29.8(1.2)
II 0.015 0 --- _ 0.7290(69) _ 0.7706(31) 25.4(7)
II 0.02 _ 0.1245(418) _ 0.7805(38) _ 0.7853(41) 23.4(7)
II 0.05 _ 0.7108(64) _ 0.8468(11) _ 0.8527(6) 19.6(1.1)
II 0.1 _ 0.8465(11) _ 0.8684(8) _ 0.8692(11) 16.0(5)
II 0.2 _ 0.8798(6) _ 0.8849(9) _ 0.8837(8) 14.0(3)
II 0.4 _ 0.8949(3) _ 0.8963(6) _ 0.8955(8) 12.6(2)
II 0.6 _ 0.9011(2) _ 0.9036(4) _ 0.9026(7) 11.6(2)
II 0.8 _ 0.9015(3) _ 0.9042(6) _ 0.9041(6) 11.4(2)
II 1.0 _ 0.9028(8) _ 0.9037(9) _ 0.9055(6) 11.0(0)
III 0.005 0 --- 0 --- 1 --- ---
III 0.01 0 --- 0 --- 1 --- ---
III 0.015 0 --- 0 --- _ 0.3682(294) 35.6(3.3)
III 0.02 0 --- _ 0.2430(84) _ 0.5869(102) 42.0(2.5)
III 0.05 0 --- _ 0.6864(103) _ 0.7417(67) 22.4(1.5)
III 0.1 _ 0.5786(111) _ 0.8046(35) _ 0.8108(29) 16.2(5)
III 0.2 _ 0.7913(63) _ 0.8456(22) _ 0.8456(19) 12.8(2)
III 0.4 _ 0.8494(22) _ 0.8621(15) _ 0.8621(13) 11.4(2)
III 0.6 _ 0.8620(2) _ 0.8609(18) _ 0.8609(24) 11.0(0)
III 0.8 _ 0.8657(21) _ 0.8662(11) _ 0.8691(17) 11.6(2)
III 1.0 _ 0.8695(12) _ 0.8700(2) _ 0.8717(14) 10.8(2)
IV 0.005 0 --- 0 --- 0 --- ---
IV 0.01 0 --- 0 --- 2 --- ---
IV 0.015 0 --- 0 --- _ 0.3798(81) 34.0(1.1)
IV 0.02 0 --- 3 --- _ 0.4566(187) 32.6(1.5)
IV 0.05 0 --- _ 0.5671(49) _ 0.6082(78) 20.6(6)
IV 0.1 _ 0.2217(391) _ 0.6576(39) _ 0.6750(31) 18.6(8)
IV 0.2 _ 0.5733(7) _ 0.7476(18) _ 0.7477(32) 15.0(8)
IV 0.4 _ 0.7262(119) _ 0.7734(33) _ 0.7833(21) 12.8(3)
IV 0.6 _ 0.7810(55) _ 0.7950(17) _ 0.7923(26) 11.8(3)
IV 0.8 _ 0.7945(18) _ 0.8017(14) _ 0.8057(14) 11.2(2)
IV 1.0 _ 0.8011(19) _ 0.8069(33) _ 0.8067(34) 11.6(4)
V 0.005 3 --- 2 --- _ 0.5642(84) 191.2(20.5)
V 0.01 3 --- 2 --- _ 0.6331(97) 149.6(14.1)
V 0.015 3 --- 4 --- _ 0.6645(56) 125.8(6.8)
V 0.02 3 --- 4 --- _ 0.6586(39) 110.8(3.8)
V 0.05 3 --- 4 --- _ 0.7077(42) 62.6(2.0)
V 0.1 3 --- _ 0.5838(81) _ 0.7307(29) 36.0(1.0)
V 0.2 _ 0.2073(716) _ 0.7135(4) _ 0.7617(54) 25.2(2)
V 0.4 _ 0.5998(123) _ 0.7705(49) _ 0.7777(48) 17.4(4)
V 0.6 _ 0.6844(26) _ 0.7830(44) _ 0.7858(38) 15.4(6)
V 0.8 _ 0.7169(3) _ 0.7922(29) _ 0.7928(3) 14.8(2)
V 1.0 _ 0.7558(32) _ 0.7988(9) _ 0.7989(15) 13.8(3)
";

/// Published per-corpus average relative uncertainties: corpus, threshold, original, stable, adaptive.
pub const PUBLISHED_STABILITY: [(&str, f64, f64, f64, f64); 5] = [
    ("I", 0.015, 0.0494, 0.0025, 0.0012),
    ("II", 0.02, 0.0436, 0.0014, 0.0014),
    ("III", 0.1, 0.0060, 0.0024, 0.0023),
    ("IV", 0.1, 0.0361, 0.0034, 0.0035),
    ("V", 0.2, 0.0756, 0.0045, 0.0048),
];
pub const PUBLISHED_GLOBAL: (f64, f64, f64) = (0.0421, 0.0028, 0.0026);

fn summary(text: &str) -> Option<Summary> {
    if text == "---" {
        return None;
    }
    let p = notation::parse(text).expect("fixture value");
    Some(Summary::new(p.mean, p.delta))
}

fn cell(approach: Approach, corpus: &str, x: f64, cv: &str, f1: &str, epochs: Option<Summary>) -> CellStats {
    let cv = if cv == "_" { N_RUNS } else { cv.parse().expect("cv") };
    let f1 = summary(f1);
    CellStats {
        approach,
        corpus_id: corpus.to_string(),
        x,
        n_runs: N_RUNS,
        cv,
        f1,
        epochs: f1.and(epochs),
        n_train: 0.0,
        n_val: 0.0,
    }
}

/// Cells of the published results; fixed approaches get their exact epoch counts.
pub fn published_cells() -> Vec<CellStats> {
    let mut out = Vec::new();
    for line in PUBLISHED_RESULTS.lines().filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let (corpus, x) = (f[0], f[1].parse::<f64>().unwrap());
        out.push(cell(Approach::Original, corpus, x, f[2], f[3], Some(Summary::exact(5.0))));
        out.push(cell(Approach::Stable, corpus, x, f[4], f[5], Some(Summary::exact(20.0))));
        out.push(cell(Approach::Adaptive, corpus, x, f[6], f[7], summary(f[8])));
    }
    out
}

/// Epoch-level restatement of the adaptive rules, written independently of
/// the library: returns the decision per epoch and the stop epoch.
pub fn reference_adaptive(
    losses: &[f64],
    warmup: u32,
    patience: u32,
    resumption: bool,
) -> (Vec<EpochDecision>, Option<u32>) {
    let mut best = f64::INFINITY;
    let mut window: Option<u32> = None;
    let mut decisions = Vec::new();
    for (i, &loss) in losses.iter().enumerate() {
        let epoch = i as u32 + 1;
        let improved = loss < best;
        if improved {
            best = loss;
        }
        let d = if epoch <= warmup {
            EpochDecision::Continue
        } else if let Some(left) = window {
            if improved && resumption {
                window = None;
                EpochDecision::ResumeConstant
            } else if left == 1 {
                decisions.push(EpochDecision::Stop);
                return (decisions, Some(epoch));
            } else {
                window = Some(left - 1);
                EpochDecision::Continue
            }
        } else if improved {
            EpochDecision::Continue
        } else if patience == 0 {
            decisions.push(EpochDecision::Stop);
            return (decisions, Some(epoch));
        } else {
            window = Some(patience);
            EpochDecision::EnterCoolDown
        };
        decisions.push(d);
    }
    (decisions, None)
}

/// Loss sequence generator mixing improving stretches, plateaus, ties and spikes.
pub fn random_losses(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(len);
    let mut level: f64 = rng.gen_range(0.5..2.0);
    let trend: f64 = rng.gen_range(0.0..0.2);
    for _ in 0..len {
        let r: f64 = rng.gen();
        level = if r < 0.45 {
            level * (1.0 - rng.gen_range(0.0..trend.max(1e-3)))
        } else if r < 0.55 {
            level
        } else {
            level * (1.0 + rng.gen_range(-0.05..0.08))
        };
        // Quantize so exact ties occur.
        v.push((level * 1e3).round() / 1e3);
    }
    v
}

/// Checks one adaptive trace against every schedule property. Returns a
/// description of the first violation.
pub fn check_adaptive_trace(cfg: &ScheduleConfig, losses: &[f64]) -> Result<(), String> {
    let ScheduleMode::Adaptive {
        patience,
        cooldown,
        resumption,
    } = cfg.mode
    else {
        return Err("not adaptive".into());
    };
    let trace = schedule_trace(cfg, losses, Some(losses.len() as u32)).map_err(|e| e.to_string())?;
    let (ref_decisions, ref_stop) = reference_adaptive(losses, cfg.warmup_epochs, patience, resumption);
    if trace.decisions != ref_decisions || trace.stop_epoch != ref_stop {
        return Err(format!(
            "decisions differ from reference: {:?} vs {:?}",
            trace.decisions, ref_decisions
        ));
    }
    if trace.stop_epoch.is_none() && !trace.cap_reached {
        return Err("neither stop nor cap".into());
    }
    let strictly_improving = losses.windows(2).all(|w| w[1] < w[0]);
    if strictly_improving && trace.stop_epoch.is_some() {
        return Err("improving sequence stopped".into());
    }
    if !resumption && trace.decisions.contains(&EpochDecision::ResumeConstant) {
        return Err("resumed with resumption off".into());
    }
    let w = cfg.warmup_epochs as usize;
    for (i, d) in trace.decisions.iter().enumerate() {
        let lr = trace.lr_curve[i];
        if !(0.0..=cfg.max_lr * (1.0 + 1e-12)).contains(&lr) {
            return Err(format!("lr {lr} out of range at epoch {}", i + 1));
        }
        if i >= w && i > 0 && trace.decisions[i - 1] == EpochDecision::ResumeConstant && lr != cfg.max_lr {
            return Err(format!("lr {lr} after resumption at epoch {}", i + 1));
        }
        if *d == EpochDecision::ResumeConstant && i < w {
            return Err("resumed during warm-up".into());
        }
    }
    if let Some(stop) = trace.stop_epoch {
        let stop = stop as usize;
        if patience == 0 {
            let prev_best = losses[..stop - 1].iter().copied().fold(f64::INFINITY, f64::min);
            if losses[stop - 1] < prev_best {
                return Err("patience 0 stopped on an improvement".into());
            }
            if trace.decisions[..stop - 1].iter().any(|d| *d != EpochDecision::Continue) {
                return Err("patience 0 emitted a non-continue decision before stopping".into());
            }
        } else {
            let p = patience as usize;
            let entry = trace
                .decisions
                .iter()
                .rposition(|d| *d == EpochDecision::EnterCoolDown)
                .ok_or("stop without cool-down")?;
            if entry + 1 + p != stop {
                return Err(format!("stop at {stop}, cool-down entered at {}", entry + 1));
            }
            let best_before = losses[..=entry].iter().copied().fold(f64::INFINITY, f64::min);
            if resumption && losses[entry + 1..stop].iter().any(|&l| l < best_before) {
                return Err("new best inside the final window".into());
            }
            if cooldown == CooldownShape::Linear && trace.lr_curve[stop - 1] != 0.0 {
                return Err(format!("lr {} at stop", trace.lr_curve[stop - 1]));
            }
            if !resumption {
                let entries = trace.decisions.iter().filter(|d| **d == EpochDecision::EnterCoolDown).count();
                let consumed = stop - (entry + 1);
                if entries != 1 || consumed != p {
                    return Err("no-resumption run used more than one window".into());
                }
            }
        }
    }
    Ok(())
}

/// Declarative span oracle: `(t, s, e)` is a span iff position `s` starts an
/// entity of type `t` (a `B-t`, or an `I-t` not preceded by a tag of type `t`),
/// every tag in `(s, e]` is `I-t`, and the tag after `e` is not `I-t`.
pub fn oracle_spans(tags: &[String]) -> Vec<(String, usize, usize)> {
    let parts = |i: usize| -> Option<(&str, &str)> {
        let (prefix, ty) = tags.get(i)?.split_once('-')?;
        matches!(prefix, "B" | "I").then_some((prefix, ty))
    };
    let is_inside = |i: usize, t: &str| parts(i) == Some(("I", t));
    let mut out = Vec::new();
    for s in 0..tags.len() {
        let Some((prefix, t)) = parts(s) else { continue };
        let starts = prefix == "B" || s == 0 || parts(s - 1).map_or(true, |(_, u)| u != t);
        if !starts {
            continue;
        }
        for e in s..tags.len() {
            if (s + 1..=e).all(|i| is_inside(i, t)) && !is_inside(e + 1, t) {
                out.push((t.to_string(), s, e));
            }
        }
    }
    out
}

/// Micro tp/fp/fn counts and f1 from the oracle spans.
pub fn oracle_micro(gold: &[Vec<String>], pred: &[Vec<String>]) -> (usize, usize, usize, BTreeMap<String, (usize, usize, usize)>) {
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut per: BTreeMap<String, (usize, usize, usize)> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        let gs = oracle_spans(g);
        let ps = oracle_spans(p);
        for s in &ps {
            if gs.contains(s) {
                tp += 1;
                per.entry(s.0.clone()).or_default().0 += 1;
            } else {
                fp += 1;
                per.entry(s.0.clone()).or_default().1 += 1;
            }
        }
        for s in gs.iter().filter(|s| !ps.contains(s)) {
            fn_ += 1;
            per.entry(s.0.clone()).or_default().2 += 1;
        }
    }
    (tp, fp, fn_, per)
}

pub fn random_tags(rng: &mut ChaCha8Rng, len: usize, types: usize) -> Vec<String> {
    const TYPES: [&str; 3] = ["PER", "LOC", "ORG"];
    (0..len)
        .map(|_| match rng.gen_range(0..3) {
            0 => "O".to_string(),
            1 => format!("B-{}", TYPES[rng.gen_range(0..types)]),
            _ => format!("I-{}", TYPES[rng.gen_range(0..types)]),
        })
        .collect()
}

/// Largest elementwise relative error between analytic and central-difference gradients.
pub fn gradient_check(seed: u64) -> (usize, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vocab = rng.gen_range(3..=6);
    let dim = rng.gen_range(1..=4);
    let tags = rng.gen_range(2..=5);
    let mut model = TaggerModel::random(vocab, dim, tags, seed ^ 0xABCD);
    for v in &mut model.params.values {
        *v *= 5.0;
    }
    let n_params = model.params.values.len();
    assert!(n_params <= 200, "{n_params} parameters");
    let batch: Vec<EncodedSentence> = (0..rng.gen_range(1..=3))
        .map(|_| {
            let len = rng.gen_range(1..=5);
            EncodedSentence {
                ids: (0..len).map(|_| rng.gen_range(0..vocab)).collect(),
                tags: (0..len).map(|_| rng.gen_range(0..tags)).collect(),
            }
        })
        .collect();
    let refs: Vec<&EncodedSentence> = batch.iter().collect();
    let (_, grad) = model.loss_and_gradients(&refs).unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for i in 0..n_params {
        let orig = model.params.values[i];
        model.params.values[i] = orig + h;
        let up = model.loss(&batch).unwrap();
        model.params.values[i] = orig - h;
        let down = model.loss(&batch).unwrap();
        model.params.values[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.values[i];
        let scale = analytic.abs().max(numeric.abs());
        // Entries that are zero analytically must be zero to rounding.
        let rel = if scale < 1e-7 { 0.0 } else { (analytic - numeric).abs() / scale };
        worst = worst.max(rel);
    }
    (n_params, worst)
}
