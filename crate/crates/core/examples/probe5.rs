//! Temporary tuning probe: AE sanity and noise-scale sweep for the
//! unsupervised related pair.

use std::time::Instant;

use munmt::corpus::{detokenize, LangId};
use munmt::metrics::evaluate;
use munmt::experiments::generate_world;
use munmt::noise::NoiseConfig;
use munmt::schedules::{
    train, Architecture, CorporaPaths, LossWeights, MlmConfig, ModelParams, MonoPath,
    ParallelPath, TrainSchedule,
};
use munmt::synthlang::{DerivePlan, SynthSpec, WorldPlan};

fn main() {
    let dir = std::path::PathBuf::from("/tmp/probe5");
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
    let val = data.validation.as_ref().unwrap();
    let n = 200.min(val.pairs.len());

    // label, shuffle_k, p_drop, bt weight, lr, steps, batch
    let variants: Vec<(&str, usize, f64, f64, f64, usize, usize)> = vec![
        ("ae_only_k1", 1, 0.1, 0.0, 0.3, 3000, 16),
        ("k1_b16_lr0.3_s12k", 1, 0.1, 1.0, 0.3, 12000, 16),
        ("k2_b16_lr0.2_s12k", 2, 0.1, 1.0, 0.2, 12000, 16),
    ];
    for (label, k, p_drop, bt, lr, steps, batch) in variants {
        let schedule = TrainSchedule {
            architecture: Architecture::UnsupervisedBaseline,
            focal: ["rel".into(), "yy".into()],
            references: vec![],
            steps,
            batch_size: batch,
            loss_weights: LossWeights {
                bt,
                ..LossWeights::default()
            },
            noise: NoiseConfig {
                p_drop,
                shuffle_k: k,
            },
            mlm: MlmConfig {
                enabled: true,
                mask_rate: 0.15,
                steps: 500,
            },
            seed: 17,
            validate_every: 1000,
            val_pairs: 32,
            bpe_merges: 400,
            model: ModelParams {
                max_len: 32,
                embed_dim: 48,
                hidden_dim: 96,
                num_layers: 2,
                num_heads: 2,
                learning_rate: lr,
            },
            sup_model: None,
        };
        let t0 = Instant::now();
        let outcome = train(&schedule, &data).expect("train");
        let secs = t0.elapsed().as_secs_f64();
        let tr = &outcome.translator;
        let rel = LangId::new("rel");
        let yy = LangId::new("yy");
        let mut recon = 0usize;
        for (_, t) in &val.pairs[..50] {
            if &tr.translate(t, &yy, &yy).expect("ae") == t {
                recon += 1;
            }
        }
        let mut scores = Vec::new();
        for (src, tgt) in [(&rel, &yy), (&yy, &rel)] {
            let mut hyps = Vec::new();
            let mut refs = Vec::new();
            for (s, t) in &val.pairs[..n] {
                let (input, expect) = if src == &rel { (s, t) } else { (t, s) };
                hyps.push(tr.translate(input, src, tgt).expect("tr"));
                refs.push(expect.clone());
            }
            let rep = evaluate(&hyps, &refs).expect("eval");
            scores.push(format!("{src}->{tgt} {:.2}", rep.bleu));
        }
        let vals: Vec<String> = outcome
            .log
            .iter()
            .filter(|e| e.term == "val_bleu")
            .map(|e| format!("{:.1}", e.value))
            .collect();
        println!(
            "{label}\trecon {recon}/50\t{}\t{:.0}s\tbt_skipped {}\tval [{}]",
            scores.join("  "),
            secs,
            outcome.diagnostics.bt_skipped,
            vals.join(", ")
        );
        if label.starts_with("ae_only") && recon < 40 {
            for (_, t) in &val.pairs[..3] {
                let back = tr.translate(t, &yy, &yy).expect("ae");
                println!("  AE IN  {}", detokenize(t));
                println!("  AE OUT {}", detokenize(&back));
            }
        }
    }
}
