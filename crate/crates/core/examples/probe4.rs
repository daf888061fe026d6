//! Temporary diagnostic probe: why does pure AE+BT stall on the related
//! pair? Prints BPE coverage, copy baseline, per-term loss phases,
//! decode-length stats, and sample decodes.

use std::time::Instant;

use munmt::corpus::{detokenize, LangId};
use munmt::experiments::generate_world;
use munmt::metrics::evaluate;
use munmt::schedules::{
    train, Architecture, CorporaPaths, LossWeights, MlmConfig, ModelParams, MonoPath,
    ParallelPath, TrainSchedule,
};
use munmt::subword::{apply_bpe, learn_bpe};
use munmt::synthlang::{DerivePlan, SynthSpec, WorldPlan};

fn main() {
    let dir = std::path::PathBuf::from("/tmp/probe4");
    let _ = std::fs::remove_dir_all(&dir);
    let plan = WorldPlan {
        spec: SynthSpec {
            vocab_size: 40,
            min_sentence_len: 3,
            max_sentence_len: 8,
            corpus_size: 2500,
            test_pairs: 500,
            markov_order: 1,
            base_inventory: "aeiklmnorstu".into(),
            seed: 8,
        },
        base: "yy".into(),
        derive: vec![DerivePlan::Related {
            name: "rel".into(),
            strength: 0.5,
            inventory: None,
        }],
        parallel: vec![],
        tests: vec![["rel".into(), "yy".into()]],
    };
    generate_world(&plan, &dir).expect("world");

    let corpora = CorporaPaths {
        mono: vec![
            MonoPath {
                lang: "rel".into(),
                path: "mono.rel.txt".into(),
            },
            MonoPath {
                lang: "yy".into(),
                path: "mono.yy.txt".into(),
            },
        ],
        parallel: vec![],
        validation: Some(ParallelPath {
            src_lang: "rel".into(),
            tgt_lang: "yy".into(),
            path: "test.rel-yy.tsv".into(),
        }),
    };
    let data = corpora.load(&dir).expect("load");

    // --- BPE whole-word coverage at the probe merge count
    let merges = 400usize;
    let texts: Vec<&[Vec<String>]> = data
        .mono
        .iter()
        .map(|m| m.sentences.as_slice())
        .collect();
    let bpe = learn_bpe(&texts, merges).expect("bpe");
    let mut tokens = 0usize;
    let mut single = 0usize;
    for m in &data.mono {
        for s in &m.sentences {
            let pieces = apply_bpe(s, &bpe);
            tokens += s.len();
            // a word is whole iff its group of pieces (ending at the
            // boundary marker) has length one
            let mut run = 0usize;
            for p in &pieces {
                run += 1;
                if p.ends_with(&bpe.marker) {
                    if run == 1 {
                        single += 1;
                    }
                    run = 0;
                }
            }
        }
    }
    println!(
        "bpe merges {merges}: {:.1}% of corpus tokens are single pieces",
        100.0 * single as f64 / tokens as f64
    );

    // --- copy baseline: score rel source directly against yy reference
    let val = data.validation.as_ref().unwrap();
    let n = 200.min(val.pairs.len());
    let srcs: Vec<Vec<String>> = val.pairs[..n].iter().map(|(s, _)| s.clone()).collect();
    let refs: Vec<Vec<String>> = val.pairs[..n].iter().map(|(_, t)| t.clone()).collect();
    let copy = evaluate(&srcs, &refs).expect("copy eval");
    println!(
        "copy baseline rel->yy: bleu {:.2} ter {:.3}",
        copy.bleu, copy.character_ter
    );

    let schedule = TrainSchedule {
        architecture: Architecture::UnsupervisedBaseline,
        focal: ["rel".into(), "yy".into()],
        references: vec![],
        steps: 4000,
        batch_size: 8,
        loss_weights: LossWeights::default(),
        noise: Default::default(),
        mlm: MlmConfig {
            enabled: true,
            mask_rate: 0.15,
            steps: 500,
        },
        seed: 17,
        validate_every: 500,
        val_pairs: 32,
        bpe_merges: merges,
        model: ModelParams {
            max_len: 32,
            embed_dim: 48,
            hidden_dim: 96,
            num_layers: 2,
            num_heads: 2,
            learning_rate: 0.3,
        },
        sup_model: None,
    };
    let t0 = Instant::now();
    let outcome = train(&schedule, &data).expect("train");
    println!("train took {:.0}s", t0.elapsed().as_secs_f64());
    println!("term counts: {:?}", outcome.term_counts);
    println!("diagnostics: {:?}", outcome.diagnostics);

    // --- per-term loss, first vs last quarter
    for term in ["ae_rel", "ae_yy", "bt_rel_yy", "bt_yy_rel", "mlm"] {
        let vals: Vec<f64> = outcome
            .log
            .iter()
            .filter(|e| e.term == term)
            .map(|e| e.value)
            .collect();
        if vals.is_empty() {
            println!("term {term}: (absent)");
            continue;
        }
        let q = (vals.len() / 4).max(1);
        let head: f64 = vals[..q].iter().sum::<f64>() / q as f64;
        let tail: f64 = vals[vals.len() - q..].iter().sum::<f64>() / q as f64;
        println!("term {term}: first-quarter {head:.3} last-quarter {tail:.3} (n={})", vals.len());
    }
    let vals: Vec<String> = outcome
        .log
        .iter()
        .filter(|e| e.term == "val_bleu")
        .map(|e| format!("{:.1}", e.value))
        .collect();
    println!("val trajectory: [{}]", vals.join(", "));

    // --- decode behavior on validation sentences
    let tr = &outcome.translator;
    let rel = LangId::new("rel");
    let yy = LangId::new("yy");
    let mut hyps = Vec::new();
    let mut hyp_tokens = 0usize;
    let mut ref_tokens = 0usize;
    let mut empties = 0usize;
    for (s, t) in &val.pairs[..n] {
        let hyp = tr.translate(s, &rel, &yy).expect("translate");
        if hyp.is_empty() {
            empties += 1;
        }
        hyp_tokens += hyp.len();
        ref_tokens += t.len();
        hyps.push(hyp);
    }
    println!(
        "decode rel->yy: mean hyp len {:.2} vs ref {:.2} tokens, {} empty of {n}",
        hyp_tokens as f64 / n as f64,
        ref_tokens as f64 / n as f64,
        empties
    );
    let vs_ref = evaluate(&hyps, &refs).expect("eval");
    let vs_src = evaluate(&hyps, &srcs).expect("eval");
    println!(
        "hyp vs ref: bleu {:.2}; hyp vs src (copy-ness): bleu {:.2}",
        vs_ref.bleu, vs_src.bleu
    );

    // --- AE sanity: reconstruct own language without noise
    let mut same = 0usize;
    for (_, t) in &val.pairs[..50] {
        let back = tr.translate(t, &yy, &yy).expect("ae decode");
        if &back == t {
            same += 1;
        }
    }
    println!("yy->yy exact reconstructions: {same}/50");

    for (s, t) in &val.pairs[..6] {
        let hyp = tr.translate(s, &rel, &yy).expect("translate");
        println!("SRC {}", detokenize(s));
        println!("HYP {}", detokenize(&hyp));
        println!("REF {}", detokenize(t));
    }
}
