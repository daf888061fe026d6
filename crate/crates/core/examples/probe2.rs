//! Temporary tuning probe: supervised-run hyperparameter sweep on the
//! world A corpus. Usage: probe2

use std::time::Instant;

use munmt::corpus::LangId;
use munmt::experiments::{evaluate_files, generate_world, translate_file};
use munmt::schedules::{
    train, Architecture, CorporaPaths, LossWeights, MlmConfig, ModelParams, ParallelPath,
    TrainSchedule,
};
use munmt::synthlang::{DerivePlan, ParallelPlan, SynthSpec, WorldPlan};

fn main() {
    let dir = std::path::PathBuf::from("/tmp/probe2");
    let _ = std::fs::remove_dir_all(&dir);
    let plan = WorldPlan {
        spec: SynthSpec {
            vocab_size: 50,
            min_sentence_len: 3,
            max_sentence_len: 8,
            corpus_size: 2000,
            test_pairs: 500,
            markov_order: 1,
            base_inventory: "aeiklmnorstu".into(),
            seed: 7,
        },
        base: "yy".into(),
        derive: vec![DerivePlan::Distant {
            name: "xx".into(),
            inventory: "greek".into(),
        }],
        parallel: vec![ParallelPlan {
            src: "xx".into(),
            tgt: "yy".into(),
            count: 2000,
            salt: 11,
        }],
        tests: vec![["xx".into(), "yy".into()]],
    };
    generate_world(&plan, &dir).expect("world");

    let corpora = CorporaPaths {
        mono: vec![],
        parallel: vec![ParallelPath {
            src_lang: "xx".into(),
            tgt_lang: "yy".into(),
            path: "parallel.xx-yy.tsv".into(),
        }],
        validation: Some(ParallelPath {
            src_lang: "xx".into(),
            tgt_lang: "yy".into(),
            path: "test.xx-yy.tsv".into(),
        }),
    };

    let variants: Vec<(&str, f64, usize, usize, usize, usize, usize, usize)> = vec![
        // label, lr, merges, steps, embed, hidden, layers, batch
        ("lr0.2_s20k_b8", 0.2, 300, 20000, 48, 96, 2, 8),
        ("lr0.3_s20k_b8", 0.3, 300, 20000, 48, 96, 2, 8),
        ("lr0.3_s10k_b16", 0.3, 300, 10000, 48, 96, 2, 16),
    ];

    for (label, lr, merges, steps, embed, hidden, layers, batch) in variants {
        let schedule = TrainSchedule {
            architecture: Architecture::SupervisedBaseline,
            focal: ["xx".into(), "yy".into()],
            references: vec![],
            steps,
            batch_size: batch,
            loss_weights: LossWeights::default(),
            noise: Default::default(),
            mlm: MlmConfig {
                enabled: false,
                ..Default::default()
            },
            seed: 17,
            validate_every: 500,
            val_pairs: 32,
            bpe_merges: merges,
            model: ModelParams {
                max_len: 32,
                embed_dim: embed,
                hidden_dim: hidden,
                num_layers: layers,
                num_heads: 2,
                learning_rate: lr,
            },
            sup_model: None,
        };
        let t0 = Instant::now();
        let data = corpora.load(&dir).expect("load");
        let outcome = train(&schedule, &data).expect("train");
        let train_s = t0.elapsed().as_secs_f64();
        let model_dir = dir.join(format!("model_{label}"));
        outcome.translator.save(&model_dir).expect("save");
        let hyp = dir.join(format!("hyp_{label}.txt"));
        translate_file(
            &model_dir,
            &LangId::new("xx"),
            &LangId::new("yy"),
            &dir.join("test.xx-yy.xx.txt"),
            &hyp,
            Some(200),
            None,
        )
        .expect("translate");
        let (bleu, ter) =
            evaluate_files(&hyp, &dir.join("test.xx-yy.yy.txt"), None, Some(200)).expect("eval");
        let vals: Vec<String> = outcome
            .log
            .iter()
            .filter(|e| e.term == "val_bleu")
            .map(|e| format!("{:.1}", e.value))
            .collect();
        println!(
            "{label}\tbleu {bleu:.2}\tter {ter:.3}\ttrain {train_s:.0}s\tval [{}]",
            vals.join(", ")
        );
    }
}
