//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed. Pass a substring to run a
//! subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hashgen::checkpoint::Checkpoint;
use hashgen::corpus::vocab::{END, MASK, PAD, SEP, START};
use hashgen::corpus::{
    expand_masked_examples, load_reviews, make_seq2seq_example, masked_from_clean,
    seq2seq_from_clean, trim_pad, CleanRecord, CsvSchema, FramingConfig, ReviewRecord, Vocabulary,
};
use hashgen::evalmetrics::{
    bleu, cv_percent, descriptive_stats, meteor, nist, InfoTable, PredictionRecord,
};
use hashgen::maskedlm::{generate_autoregressive, MaskedLmModel, TransformerConfig};
use hashgen::numcore::{gradient_check, Adam, AdamConfig, LstmCell, ParamStore};
use hashgen::pipeline;
use hashgen::seq2seq::{Annotations, Seq2SeqConfig, Seq2SeqModel};
use hashgen::train::{evaluate, train_epoch};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

const DATA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn words(ids: &[usize], vocab: &Vocabulary) -> String {
    ids.iter()
        .map(|&i| vocab.token(i).unwrap_or("?"))
        .collect::<Vec<_>>()
        .join(" ")
}

// ---------------------------------------------------------------- golden

fn preprocessing_golden() -> Outcome {
    let text = "fica super lindo ele aplicado , veio conforme o anunciado !";
    let record = ReviewRecord {
        id: "r1".into(),
        title_raw: "adorei o produto !".into(),
        text_raw: text.into(),
    };
    let vocab = ok(Vocabulary::build(&[text, "adorei o produto !"], 100))?;
    let examples = expand_masked_examples(&record, &vocab, &FramingConfig::default())
        .map_err(|e| format!("record skipped: {e:?}"))?;
    let expected = [
        (format!("{text} [SEP] [MASK]"), "adorei"),
        (format!("{text} [SEP] adorei [MASK]"), "o"),
        (format!("{text} [SEP] adorei o [MASK]"), "produto"),
        (format!("{text} [SEP] adorei o produto [MASK]"), "!"),
        (format!("{text} [SEP] adorei o produto ! [MASK]"), "[SEP]"),
    ];
    ensure!(
        examples.len() == 5,
        "expected 5 examples, got {}",
        examples.len()
    );
    for (k, (ex, (ctx, target))) in examples.iter().zip(&expected).enumerate() {
        let got = words(ex.context(), &vocab);
        ensure!(&got == ctx, "pair {k}: context {got:?} != {ctx:?}");
        let t = vocab.token(ex.target_id).unwrap_or("?");
        ensure!(t == *target, "pair {k}: target {t:?} != {target:?}");
        ensure!(
            ex.context_ids[ex.mask_position] == MASK,
            "pair {k}: mask position"
        );
    }

    let sample = ReviewRecord {
        id: "r2".into(),
        title_raw: "produto muito bom".into(),
        text_raw: "excelente qualidade, chegou dentro do prazo, recomendo".into(),
    };
    let vocab = ok(Vocabulary::build(
        &[
            "produto muito bom",
            "excelente qualidade , chegou dentro do prazo , recomendo",
        ],
        100,
    ))?;
    let ex = make_seq2seq_example(&sample, &vocab, &FramingConfig::default())
        .map_err(|e| format!("{e:?}"))?;
    let want = vec![
        START,
        vocab.id("produto"),
        vocab.id("muito"),
        vocab.id("bom"),
        END,
    ];
    ensure!(
        ex.target() == want.as_slice(),
        "target {:?} != {want:?}",
        ex.target()
    );
    ensure!(
        words(ex.target(), &vocab) == "<start> produto muito bom <end>",
        "target tokens"
    );
    ensure!(
        words(ex.source(), &vocab) == "excelente qualidade , chegou dentro do prazo , recomendo",
        "source tokens {}",
        words(ex.source(), &vocab)
    );
    Ok("5/5 masked pairs and the seq2seq target match".into())
}

fn table2_cv() -> Outcome {
    // (mean, sd, printed %CV) for original/predicted lengths of both models.
    let rows = [
        (2.632, 1.647, 62.57),
        (2.964, 1.866, 62.96),
        (2.117, 1.096, 51.77),
        (1.784, 0.525, 29.43),
    ];
    let mut worst: f64 = 0.0;
    for (mean, sd, printed) in rows {
        // Two points m ± sd/√2 have exactly this sample mean and sd.
        let d = sd / 2f64.sqrt();
        let stats = ok(descriptive_stats(&[mean - d, mean + d]))?;
        ensure!(
            (stats.mean - mean).abs() < 1e-12 && (stats.sd - sd).abs() < 1e-12,
            "reconstruction of {mean} ± {sd}"
        );
        let cv = stats.cv_percent.ok_or("no %CV")?;
        let direct = cv_percent(mean, sd).ok_or("no %CV")?;
        ensure!(
            (direct - cv).abs() < 1e-9,
            "cv_percent {direct} vs descriptive_stats {cv}"
        );
        let err = (cv - printed).abs();
        worst = worst.max(err);
        ensure!(err <= 0.02, "{mean} ± {sd}: %CV {cv:.4} vs {printed}");
    }
    Ok(format!("max |Δ%CV| = {worst:.4}"))
}

// -------------------------------------------------------------- gradients

fn gradient_suite() -> Outcome {
    let mut report = Vec::new();

    // LSTM cell through time, loss = Σ_t probe_t · h_t.
    {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut store = ParamStore::new();
        let cell = ok(LstmCell::register(&mut store, "cell", 3, 5, &mut rng))?;
        let inputs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let probe: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let steps = ok(cell.run(&store, &inputs))?;
        let mut grads = store.new_grads();
        cell.run_backward(&store, &steps, &probe, &mut grads);
        store.set_grads(grads);
        let r = ok(gradient_check(&mut store, 1e-5, 200, 9, |s| {
            let steps = cell.run(s, &inputs)?;
            Ok(steps
                .iter()
                .zip(&probe)
                .map(|(st, p)| st.h.iter().zip(p).map(|(a, b)| a * b).sum::<f64>())
                .sum())
        }))?;
        ensure!(r.max_rel_error < 1e-4, "LSTM cell: {r:?}");
        report.push(format!("lstm {:.1e}", r.max_rel_error));
    }

    let s2s_cfg = |vocab| Seq2SeqConfig {
        vocab_size: vocab,
        embed_dim: 5,
        encoder_layers: 2,
        encoder_cells: 4,
        decoder_layers: 2,
        decoder_cells: 6,
        max_source_len: 12,
        max_target_len: 8,
        attention_dim: 5,
    };

    // Additive attention, loss = probe · context.
    {
        let mut m = ok(Seq2SeqModel::new(s2s_cfg(20), 5))?;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let src = [7, 8, 9, 10];
        let query: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let probe: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grads = ok(m.attention_gradients(&src, &query, &probe))?;
        m.params_mut().set_grads(grads);
        let base = m.clone();
        let r = ok(gradient_check(m.params_mut(), 1e-5, 200, 3, |ps| {
            let mut p = base.clone();
            *p.params_mut() = ps.clone();
            let a = p.encode(&src)?;
            let (ctx, _) = p.attend(&query, &a)?;
            Ok(ctx.iter().zip(&probe).map(|(a, b)| a * b).sum())
        }))?;
        ensure!(r.max_rel_error < 1e-4, "attention: {r:?}");
        report.push(format!("attention {:.1e}", r.max_rel_error));
    }

    // Full seq2seq step. Unit-scale jitter and eps 2e-4 keep the central
    // difference above f64 roundoff on tiny coordinates.
    {
        let mut worst: f64 = 0.0;
        for seed in 0..4 {
            let mut m = ok(Seq2SeqModel::new(s2s_cfg(15), seed))?;
            m.jitter(1.0, seed + 100);
            let src = [7, 8, 9, 10, 11];
            let tgt = [START, 12, 13, 14, END];
            let mut grads = m.params().new_grads();
            ok(m.example_loss(&src, &tgt, Some(&mut grads)))?;
            m.params_mut().set_grads(grads);
            let base = m.clone();
            let r = ok(gradient_check(m.params_mut(), 2e-4, 200, seed, |ps| {
                let mut p = base.clone();
                *p.params_mut() = ps.clone();
                Ok(p.example_loss(&src, &tgt, None)?.loss_sum)
            }))?;
            ensure!(r.max_rel_error < 1e-4, "seq2seq step, seed {seed}: {r:?}");
            worst = worst.max(r.max_rel_error);
        }
        report.push(format!("seq2seq {worst:.1e}"));
    }

    let mlm_cfg = |vocab| TransformerConfig {
        vocab_size: vocab,
        layers: 2,
        hidden: 8,
        heads: 2,
        ffn_dim: 12,
        max_len: 16,
        dropout: 0.0,
    };

    // One transformer block, loss = Σ probe ⊙ block(inputs), one key masked.
    {
        let mut m = ok(MaskedLmModel::new(mlm_cfg(15), 6))?;
        m.jitter(0.3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let inputs: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let probe: Vec<Vec<f64>> = (0..5)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let allowed = [true, true, false, true, true];
        let mut grads = m.params().new_grads();
        ok(m.block_probe(1, &inputs, &allowed, &probe, Some(&mut grads)))?;
        m.params_mut().set_grads(grads);
        let base = m.clone();
        let r = ok(gradient_check(m.params_mut(), 1e-5, 200, 2, |ps| {
            let mut p = base.clone();
            *p.params_mut() = ps.clone();
            Ok(p.block_probe(1, &inputs, &allowed, &probe, None)?.0)
        }))?;
        ensure!(r.max_rel_error < 1e-4, "transformer block: {r:?}");
        report.push(format!("block {:.1e}", r.max_rel_error));
    }

    // Full masked-LM step.
    {
        let ctx = [7, 8, 9, 10, SEP, 11, MASK];
        let mut worst: f64 = 0.0;
        for seed in 0..3 {
            let mut m = ok(MaskedLmModel::new(mlm_cfg(15), seed))?;
            m.jitter(0.3, seed + 50);
            let mut grads = m.params().new_grads();
            ok(m.example_loss(&ctx, 6, 12, None, Some(&mut grads)))?;
            m.params_mut().set_grads(grads);
            let base = m.clone();
            let r = ok(gradient_check(m.params_mut(), 1e-5, 200, seed, |ps| {
                let mut p = base.clone();
                *p.params_mut() = ps.clone();
                Ok(p.example_loss(&ctx, 6, 12, None, None)?.loss_sum)
            }))?;
            ensure!(r.max_rel_error < 1e-4, "masked-LM step, seed {seed}: {r:?}");
            worst = worst.max(r.max_rel_error);
        }
        report.push(format!("masked-lm {worst:.1e}"));
    }
    Ok(format!("max rel err: {}", report.join(", ")))
}

// --------------------------------------------------------------- overfit

fn toy_corpus() -> Result<(Vec<CleanRecord>, Vocabulary), String> {
    let report = ok(load_reviews(
        &Path::new(DATA).join("toy_pairs.csv"),
        &CsvSchema::default(),
        true,
    ))?;
    let clean: Vec<CleanRecord> = report
        .records
        .iter()
        .map(|r| CleanRecord::from_review(r).map_err(|e| format!("{}: {e:?}", r.id)))
        .collect::<Result<_, _>>()?;
    ensure!(clean.len() == 32, "toy corpus has {} pairs", clean.len());
    let texts: Vec<&str> = clean
        .iter()
        .flat_map(|r| [r.title.as_str(), r.text.as_str()])
        .collect();
    let vocab = ok(Vocabulary::build(&texts, 10_000))?;
    Ok((clean, vocab))
}

const MAX_EPOCHS: usize = 500;

fn overfit_oracle() -> Outcome {
    let (records, vocab) = toy_corpus()?;
    let framing = FramingConfig::default();

    let examples: Vec<_> = records
        .iter()
        .map(|r| seq2seq_from_clean(r, &vocab, &framing))
        .collect();
    let mut s2s = ok(Seq2SeqModel::new(Seq2SeqConfig::tiny(vocab.len()), 1))?;
    let mut adam = Adam::new(
        s2s.params(),
        AdamConfig {
            learning_rate: 1e-2,
            ..AdamConfig::default()
        },
    );
    let mut s2s_result = None;
    for epoch in 1..=MAX_EPOCHS {
        ok(train_epoch(&mut s2s, &mut adam, &examples, 8, epoch as u64))?;
        let acc = ok(evaluate(&s2s, &examples))?.accuracy;
        if acc >= 0.95 {
            let mut exact = 0;
            for ex in &examples {
                let title = &ex.target()[1..ex.target().len() - 1];
                if ok(s2s.greedy_decode(ex.source(), framing.max_target_len - 2))? == title {
                    exact += 1;
                }
            }
            if exact as f64 >= 0.9 * examples.len() as f64 {
                s2s_result = Some((epoch, acc, exact));
                break;
            }
        }
    }
    let (e1, a1, x1) = s2s_result
        .ok_or("BiLSTM did not reach 95% accuracy and 90% exact decodes in 500 epochs")?;

    let mut masked = Vec::new();
    for r in &records {
        masked.extend(
            masked_from_clean(r, &vocab, &framing).map_err(|e| format!("{}: {e:?}", r.id))?,
        );
    }
    let cfg = TransformerConfig {
        hidden: 32,
        ffn_dim: 64,
        ..TransformerConfig::tiny(vocab.len())
    };
    let mut mlm = ok(MaskedLmModel::new(cfg, 1))?;
    let mut adam = Adam::new(
        mlm.params(),
        AdamConfig {
            learning_rate: 3e-3,
            ..AdamConfig::default()
        },
    );
    let mut mlm_result = None;
    for epoch in 1..=MAX_EPOCHS {
        ok(train_epoch(&mut mlm, &mut adam, &masked, 16, epoch as u64))?;
        let acc = ok(evaluate(&mlm, &masked))?.accuracy;
        if acc >= 0.95 {
            let mut exact = 0;
            for r in &records {
                let review = vocab.encode(&r.text, framing.max_context_len, false);
                let title = vocab.encode(&r.title, framing.max_context_len, false);
                if ok(generate_autoregressive(
                    &mlm,
                    &review,
                    framing.max_context_len,
                ))?
                .output
                    == title
                {
                    exact += 1;
                }
            }
            if exact as f64 >= 0.9 * records.len() as f64 {
                mlm_result = Some((epoch, acc, exact));
                break;
            }
        }
    }
    let (e2, a2, x2) = mlm_result
        .ok_or("masked LM did not reach 95% accuracy and 90% exact decodes in 500 epochs")?;
    Ok(format!(
        "bilstm: epoch {e1}, acc {a1:.3}, {x1}/32 exact; masked-lm: epoch {e2}, acc {a2:.3}, {x2}/32 exact"
    ))
}

// --------------------------------------------------------------- metrics

fn toks(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// Occurrences of `gram` in `seq` by scanning every window.
fn occurrences(seq: &[&str], gram: &[&str]) -> usize {
    if gram.is_empty() || seq.len() < gram.len() {
        return 0;
    }
    (0..=seq.len() - gram.len())
        .filter(|&i| &seq[i..i + gram.len()] == gram)
        .count()
}

/// Distinct n-grams of `seq`, first-occurrence order.
fn distinct_ngrams<'a>(seq: &[&'a str], n: usize) -> Vec<Vec<&'a str>> {
    let mut out: Vec<Vec<&str>> = Vec::new();
    if seq.len() >= n {
        for i in 0..=seq.len() - n {
            let g = seq[i..i + n].to_vec();
            if !out.contains(&g) {
                out.push(g);
            }
        }
    }
    out
}

fn brute_bleu(hyp: &[&str], reference: &[&str]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let max_n = hyp.len().min(4);
    let mut precisions = Vec::new();
    for n in 1..=max_n {
        let matched: usize = distinct_ngrams(hyp, n)
            .iter()
            .map(|g| occurrences(hyp, g).min(occurrences(reference, g)))
            .sum();
        precisions.push(matched as f64 / (hyp.len() + 1 - n) as f64);
    }
    if precisions.contains(&0.0) {
        return 0.0;
    }
    let geo = precisions.iter().product::<f64>().powf(1.0 / max_n as f64);
    let (c, r) = (hyp.len() as f64, reference.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * geo
}

fn brute_nist(hyp: &[&str], reference: &[&str], all_refs: &[Vec<&str>]) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let corpus_count = |g: &[&str]| -> usize {
        if g.is_empty() {
            all_refs.iter().map(Vec::len).sum()
        } else {
            all_refs.iter().map(|r| occurrences(r, g)).sum()
        }
    };
    let info = |g: &[&str]| -> f64 {
        let c = corpus_count(g);
        if c == 0 {
            0.0
        } else {
            (corpus_count(&g[..g.len() - 1]) as f64 / c as f64).log2()
        }
    };
    let mut score = 0.0;
    for n in 1..=hyp.len().min(5) {
        let num: f64 = distinct_ngrams(hyp, n)
            .iter()
            .map(|g| occurrences(hyp, g).min(occurrences(reference, g)) as f64 * info(g))
            .sum();
        score += num / (hyp.len() + 1 - n) as f64;
    }
    let beta = 0.5f64.ln() / 1.5f64.ln().powi(2);
    let ratio = (hyp.len() as f64 / reference.len() as f64).min(1.0);
    score * (beta * ratio.ln().powi(2)).exp()
}

/// Every injective exact-word alignment, enumerated.
fn brute_meteor(hyp: &[&str], reference: &[&str]) -> f64 {
    fn walk(
        hyp: &[&str],
        reference: &[&str],
        i: usize,
        used: &mut Vec<bool>,
        pairs: &mut Vec<(usize, usize)>,
        best: &mut (usize, usize),
    ) {
        if i == hyp.len() {
            let m = pairs.len();
            let chunks = if m == 0 {
                0
            } else {
                1 + pairs
                    .windows(2)
                    .filter(|w| !(w[1].0 == w[0].0 + 1 && w[1].1 == w[0].1 + 1))
                    .count()
            };
            if m > best.0 || (m == best.0 && chunks < best.1) {
                *best = (m, chunks);
            }
            return;
        }
        walk(hyp, reference, i + 1, used, pairs, best);
        for j in 0..reference.len() {
            if !used[j] && reference[j] == hyp[i] {
                used[j] = true;
                pairs.push((i, j));
                walk(hyp, reference, i + 1, used, pairs, best);
                pairs.pop();
                used[j] = false;
            }
        }
    }
    if hyp.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let mut best = (0, usize::MAX);
    walk(
        hyp,
        reference,
        0,
        &mut vec![false; reference.len()],
        &mut Vec::new(),
        &mut best,
    );
    let (m, chunks) = best;
    if m == 0 {
        return 0.0;
    }
    let p = m as f64 / hyp.len() as f64;
    let r = m as f64 / reference.len() as f64;
    let f = 10.0 * p * r / (r + 9.0 * p);
    f * (1.0 - 0.5 * (chunks as f64 / m as f64).powi(3))
}

fn metric_oracles() -> Outcome {
    let fixture = [
        ("produto muito bom", "produto muito bom"),
        ("muito bom", "produto muito bom"),
        ("bom bom bom", "bom"),
        ("adorei o produto !", "adorei o produto"),
        ("produto bom chegou rapido", "chegou rapido produto bom"),
        ("a b c", "a b c"),
        ("", "otimo"),
        ("excelente qualidade , recomendo", "qualidade excelente"),
        ("o produto e o preco", "o preco e o produto"),
        ("gostei muito do produto", "nao gostei do produto"),
    ];
    let refs: Vec<Vec<&str>> = fixture.iter().map(|(_, r)| toks(r)).collect();
    let table = InfoTable::from_references(&refs);
    let mut worst: f64 = 0.0;
    for (h, r) in fixture {
        let (hyp, reference) = (toks(h), toks(r));
        let pairs = [
            ("BLEU", bleu(&hyp, &reference), brute_bleu(&hyp, &reference)),
            (
                "NIST",
                nist(&hyp, &reference, &table),
                brute_nist(&hyp, &reference, &refs),
            ),
            (
                "METEOR",
                meteor(&hyp, &reference),
                brute_meteor(&hyp, &reference),
            ),
        ];
        for (name, got, want) in pairs {
            let err = (got - want).abs();
            worst = worst.max(err);
            ensure!(
                err <= 1e-9,
                "{name}({h:?}, {r:?}) = {got} vs brute force {want}"
            );
        }
    }
    for s in ["produto muito bom", "a b c", "adorei o produto !", "bom"] {
        ensure!(bleu(&toks(s), &toks(s)) == 1.0, "identity BLEU for {s:?}");
    }
    let abc = meteor(&toks("a b c"), &toks("a b c"));
    ensure!(
        (abc - 53.0 / 54.0).abs() <= 1e-12,
        "self-METEOR(a b c) = {abc}"
    );
    Ok(format!(
        "10 cases, max |Δ| = {worst:.1e}; METEOR(a b c) = {abc:.5}"
    ))
}

// -------------------------------------------------------------- decoding

fn decoding_invariants() -> Outcome {
    let vocab_size = 40;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut models = Vec::new();
    for s in 0..10u64 {
        let mut m = ok(MaskedLmModel::new(TransformerConfig::tiny(vocab_size), s))?;
        m.jitter(0.5, s + 1000);
        if s % 2 == 1 {
            // Never choose SEP: every trace runs to the full context.
            let b = m.params().id_of("lm_head.bias").ok_or("no lm_head.bias")?;
            m.params_mut().value_mut(b).data_mut()[SEP] = -1e3;
        }
        models.push(m);
    }
    let mut full_length = 0;
    let mut truncated = 0;
    for trace_no in 0..1000 {
        let model = &models[trace_no % models.len()];
        let len = rng.gen_range(0..90);
        let mut review: Vec<usize> = (0..len).map(|_| rng.gen_range(6..vocab_size)).collect();
        let pads = rng.gen_range(0..3);
        review.extend(std::iter::repeat_n(PAD, pads));
        let max_total = if rng.gen_bool(0.2) {
            rng.gen_range(2..=80)
        } else {
            72
        };
        let limit = max_total.clamp(2, 72);
        let t = ok(generate_autoregressive(model, &review, max_total))?;
        let kept = &trim_pad(&review)[..len.min(limit - 2)];
        ensure!(
            t.review_truncated == (len + 2 > limit),
            "trace {trace_no}: truncation flag"
        );
        ensure!(
            !t.steps.is_empty() && t.steps.len() <= 72,
            "trace {trace_no}: {} steps",
            t.steps.len()
        );
        let mut prefix: Vec<usize> = kept.to_vec();
        prefix.push(SEP);
        for (k, st) in t.steps.iter().enumerate() {
            ensure!(
                st.context.len() <= limit,
                "trace {trace_no} step {k}: context {} > {limit}",
                st.context.len()
            );
            ensure!(
                st.context.iter().filter(|&&i| i == MASK).count() == 1,
                "trace {trace_no} step {k}: MASK count"
            );
            ensure!(
                st.mask_position + 1 == st.context.len(),
                "trace {trace_no} step {k}: mask not last"
            );
            ensure!(
                st.context[..st.mask_position] == prefix[..],
                "trace {trace_no} step {k}: prefix changed"
            );
            prefix.push(st.predicted);
        }
        let last = t.steps.last().expect("non-empty");
        ensure!(
            t.terminated == (last.predicted == SEP),
            "trace {trace_no}: termination flag"
        );
        let predicted: Vec<usize> = t.steps.iter().map(|s| s.predicted).collect();
        let body = if t.terminated {
            &predicted[..predicted.len() - 1]
        } else {
            &predicted[..]
        };
        ensure!(
            t.output == body,
            "trace {trace_no}: output differs from predictions"
        );
        ensure!(
            !t.output.contains(&SEP) && !t.output.contains(&MASK),
            "trace {trace_no}: special in output"
        );
        if !t.terminated {
            ensure!(
                last.context.len() == limit,
                "trace {trace_no}: stopped early without SEP"
            );
            full_length += 1;
        }
        truncated += usize::from(t.review_truncated);
    }

    let cfg = Seq2SeqConfig {
        vocab_size,
        ..Seq2SeqConfig::tiny(vocab_size)
    };
    let mut s2s = ok(Seq2SeqModel::new(cfg.clone(), 3))?;
    s2s.jitter(0.5, 4);
    let mut worst: f64 = 0.0;
    for call in 0..1000 {
        let n = rng.gen_range(1..=cfg.max_source_len);
        let mut src: Vec<usize> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.15) {
                    PAD
                } else {
                    rng.gen_range(6..vocab_size)
                }
            })
            .collect();
        if src.iter().all(|&i| i == PAD) {
            src[0] = 7;
        }
        let ann: Annotations = ok(s2s.encode(&src))?;
        let query: Vec<f64> = (0..cfg.decoder_cells)
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let (_, w) = ok(s2s.attend(&query, &ann))?;
        ensure!(
            w.len() == src.len(),
            "call {call}: {} weights for {} positions",
            w.len(),
            src.len()
        );
        ensure!(
            w.iter().all(|&x| (0.0..=1.0).contains(&x)),
            "call {call}: weight outside [0, 1]"
        );
        for (x, &id) in w.iter().zip(&src) {
            ensure!(
                id != PAD || *x == 0.0,
                "call {call}: PAD position weighted {x}"
            );
        }
        let err = (w.iter().sum::<f64>() - 1.0).abs();
        worst = worst.max(err);
        ensure!(err <= 1e-9, "call {call}: weights sum to 1 + {err:e}");
    }
    Ok(format!(
        "1000 traces ({full_length} at full context, {truncated} truncated reviews); 1000 attention calls, max |Σw - 1| = {worst:.1e}"
    ))
}

// -------------------------------------------------------------- pipeline

fn run_cli(args: &[&str]) -> Result<String, String> {
    let out = ok(Command::new(env!("CARGO_BIN_EXE_hashgen"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output())?;
    if !out.status.success() {
        return Err(format!(
            "hashgen {} exited {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn is_table_line(s: &str) -> bool {
    // "2.267 ± 0.640 %CV: 28.22"
    let parts: Vec<&str> = s.split_whitespace().collect();
    parts.len() == 5
        && parts[1] == "±"
        && parts[3] == "%CV:"
        && [parts[0], parts[2], parts[4]]
            .iter()
            .all(|p| p.parse::<f64>().is_ok())
}

fn pipeline_composition() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let csv = format!("{DATA}/sample_reviews.csv");
    let mut summary = Vec::new();
    for model in ["bilstm", "maskedlm"] {
        let d = dir.path().join(model);
        let d = d.to_str().ok_or("non-UTF-8 temp path")?;
        run_cli(&[
            "preprocess",
            "--input",
            &csv,
            "--model",
            model,
            "--outdir",
            d,
            "--seed",
            "42",
        ])?;
        run_cli(&[
            "train",
            "--data",
            d,
            "--model",
            model,
            "--preset",
            "tiny",
            "--epochs",
            "40",
            "--patience",
            "0",
            "--batch",
            "16",
            "--lr",
            "3e-3",
        ])?;
        let preds = format!("{d}/preds.jsonl");
        let report = format!("{d}/report.json");
        run_cli(&[
            "predict",
            "--checkpoint",
            &format!("{d}/model.json"),
            "--data",
            d,
            "--out",
            &preds,
        ])?;
        run_cli(&["evaluate", "--preds", &preds, "--report", &report])?;
        let r: serde_json::Value =
            ok(serde_json::from_str(&ok(std::fs::read_to_string(&report))?))?;
        let scores = |m: &str| -> Vec<f64> {
            r[m]["scores"]
                .as_array()
                .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
                .unwrap_or_default()
        };
        let rows = r["rows"].as_u64().unwrap_or(0) as usize;
        ensure!(rows == 30, "{model}: report has {rows} rows");
        for m in ["bleu", "meteor"] {
            let s = scores(m);
            ensure!(
                s.len() == rows && s.iter().all(|x| (0.0..=1.0).contains(x)),
                "{model}: {m} outside [0, 1]"
            );
        }
        let n = scores("nist");
        ensure!(
            n.len() == rows && n.iter().all(|&x| x >= 0.0),
            "{model}: negative NIST"
        );
        for side in ["original_display", "predicted_display"] {
            let line = r["lengths"][side].as_str().unwrap_or("");
            ensure!(is_table_line(line), "{model}: {side} is {line:?}");
        }
        summary.push(format!(
            "{model}: BLEU {:.3} NIST {:.3} METEOR {:.3}, predicted length {}",
            r["bleu"]["mean"].as_f64().unwrap_or(f64::NAN),
            r["nist"]["mean"].as_f64().unwrap_or(f64::NAN),
            r["meteor"]["mean"].as_f64().unwrap_or(f64::NAN),
            r["lengths"]["predicted_display"].as_str().unwrap_or("")
        ));
    }
    Ok(summary.join("; "))
}

// ------------------------------------------------------------ checkpoint

fn jsonl(preds: &[PredictionRecord]) -> Result<Vec<u8>, String> {
    let mut out = Vec::new();
    for p in preds {
        out.extend(ok(serde_json::to_vec(p))?);
        out.push(b'\n');
    }
    Ok(out)
}

fn checkpoint_round_trip() -> Outcome {
    let dir = ok(tempfile::tempdir())?;
    let mut detail = Vec::new();
    for kind in [
        hashgen::checkpoint::ModelKind::BilstmSeq2seq,
        hashgen::checkpoint::ModelKind::MaskedLm,
    ] {
        let data = dir.path().join(kind.as_str());
        ok(pipeline::preprocess(&pipeline::PreprocessOptions {
            input: Path::new(DATA).join("sample_reviews.csv"),
            outdir: data.clone(),
            model: kind,
            seed: 42,
            ratios: Default::default(),
            vocab_cap: pipeline::DEFAULT_VOCAB_CAP,
            schema: CsvSchema::default(),
            framing: FramingConfig::default(),
            strict: false,
            force: false,
        }))?;
        let path = data.join("model.json");
        let trained = ok(pipeline::train(&pipeline::TrainOptions {
            data_dir: data.clone(),
            model: Some(kind),
            preset: pipeline::Preset::Tiny,
            epochs: Some(25),
            batch_size: 16,
            learning_rate: 3e-3,
            patience: None,
            seed: 5,
            checkpoint: path.clone(),
            history: None,
            force: false,
        }))?;
        let mut records: Vec<CleanRecord> = Vec::new();
        for split in pipeline::SPLITS {
            records.extend(ok(hashgen::files::read_jsonl::<CleanRecord>(
                &pipeline::records_path(&data, split),
            ))?);
        }
        let in_memory = jsonl(&ok(pipeline::predict_records(
            &trained.checkpoint,
            &records,
        ))?)?;
        let loaded = ok(Checkpoint::load(&path))?;
        let reloaded = jsonl(&ok(pipeline::predict_records(&loaded, &records))?)?;
        ensure!(
            in_memory == reloaded,
            "{kind}: predictions differ after reload"
        );
        ensure!(
            ok(trained.checkpoint.to_json())? == ok(loaded.to_json())?,
            "{kind}: checkpoint JSON differs after reload"
        );
        let non_empty = String::from_utf8_lossy(&in_memory)
            .matches("\"predicted_title\":\"\"")
            .count();
        ensure!(
            non_empty < records.len(),
            "{kind}: every prediction is empty"
        );
        detail.push(format!("{kind}: {} predictions identical", records.len()));
    }
    Ok(detail.join("; "))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("preprocessing golden", preprocessing_golden),
        ("length-table %CV", table2_cv),
        ("gradient suite", gradient_suite),
        ("overfit oracle", overfit_oracle),
        ("metric oracles", metric_oracles),
        ("decoding invariants", decoding_invariants),
        ("pipeline composition", pipeline_composition),
        ("checkpoint round-trip", checkpoint_round_trip),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name:<22} {secs:>6.1}s  {detail}"),
            Err(e) => {
                failed += 1;
                println!("FAIL  {name:<22} {secs:>6.1}s  {e}");
            }
        }
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
