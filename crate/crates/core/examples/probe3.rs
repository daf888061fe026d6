//! Temporary tuning probe: unsupervised training on the related pair,
//! unified-script condition. Usage: probe3

use std::time::Instant;

use munmt::corpus::LangId;
use munmt::experiments::{evaluate_files, generate_world, translate_file};
use munmt::schedules::{
    train, Architecture, CorporaPaths, LossWeights, MlmConfig, ModelParams, MonoPath,
    ParallelPath, TrainSchedule,
};
use munmt::synthlang::{DerivePlan, SynthSpec, WorldPlan};

fn main() {
    let dir = std::path::PathBuf::from("/tmp/probe3");
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
        derive: vec![
            DerivePlan::Related {
                name: "rel".into(),
                strength: 0.5,
                inventory: None,
            },
            DerivePlan::Reskin {
                name: "relg".into(),
                source: "rel".into(),
                inventory: "greek".into(),
            },
        ],
        parallel: vec![],
        tests: vec![["rel".into(), "yy".into()], ["relg".into(), "yy".into()]],
    };
    generate_world(&plan, &dir).expect("world");

    let args: Vec<String> = std::env::args().skip(1).collect();
    let lang = if args.iter().any(|a| a == "disjoint") {
        "relg"
    } else {
        "rel"
    };

    // label, lr, steps, mlm_steps, bt_weight
    let variants: Vec<(&str, f64, usize, usize, f64)> = vec![
        ("s4k_lr0.3_mlm500", 0.3, 4000, 500, 1.0),
        ("s8k_lr0.3_mlm500", 0.3, 8000, 500, 1.0),
        ("s8k_lr0.2_mlm1500", 0.2, 8000, 1500, 1.0),
    ];

    for (label, lr, steps, mlm_steps, bt) in variants {
        let schedule = TrainSchedule {
            architecture: Architecture::UnsupervisedBaseline,
            focal: [lang.into(), "yy".into()],
            references: vec![],
            steps,
            batch_size: 8,
            loss_weights: LossWeights {
                bt,
                ..LossWeights::default()
            },
            noise: Default::default(),
            mlm: MlmConfig {
                enabled: true,
                mask_rate: 0.15,
                steps: mlm_steps,
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
        let corpora = CorporaPaths {
            mono: vec![
                MonoPath {
                    lang: lang.into(),
                    path: format!("mono.{lang}.txt"),
                },
                MonoPath {
                    lang: "yy".into(),
                    path: "mono.yy.txt".into(),
                },
            ],
            parallel: vec![],
            validation: Some(ParallelPath {
                src_lang: lang.into(),
                tgt_lang: "yy".into(),
                path: format!("test.{lang}-yy.tsv"),
            }),
        };
        let t0 = Instant::now();
        let data = corpora.load(&dir).expect("load");
        let outcome = train(&schedule, &data).expect("train");
        let train_s = t0.elapsed().as_secs_f64();
        let model_dir = dir.join(format!("model_{label}"));
        outcome.translator.save(&model_dir).expect("save");
        let mut scores = Vec::new();
        for (src, tgt) in [(lang, "yy"), ("yy", lang)] {
            let hyp = dir.join(format!("hyp_{label}_{src}.txt"));
            translate_file(
                &model_dir,
                &LangId::new(src),
                &LangId::new(tgt),
                &dir.join(format!("test.{lang}-yy.{src}.txt")),
                &hyp,
                Some(200),
                None,
            )
            .expect("translate");
            let (bleu, _) = evaluate_files(
                &hyp,
                &dir.join(format!("test.{lang}-yy.{tgt}.txt")),
                None,
                Some(200),
            )
            .expect("eval");
            scores.push(format!("{src}->{tgt} {bleu:.2}"));
        }
        let vals: Vec<String> = outcome
            .log
            .iter()
            .filter(|e| e.term == "val_bleu")
            .map(|e| format!("{:.1}", e.value))
            .collect();
        println!(
            "{lang} {label}\t{}\ttrain {train_s:.0}s\tval [{}]",
            scores.join("  "),
            vals.join(", ")
        );
    }
}
