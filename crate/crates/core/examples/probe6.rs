//! Temporary tuning probe: disjoint-script control and the
//! reference-ordering world (distant focal pair + graded reference
//! languages with auxiliary parallel data).

use std::time::Instant;

use munmt::corpus::LangId;
use munmt::metrics::evaluate;
use munmt::experiments::generate_world;
use munmt::noise::NoiseConfig;
use munmt::schedules::{
    train, Architecture, CorporaPaths, LossWeights, MlmConfig, ModelParams, MonoPath,
    ParallelPath, TrainSchedule,
};
use munmt::synthlang::{DerivePlan, ParallelPlan, SynthSpec, WorldPlan};

fn unsup_schedule(
    arch: Architecture,
    focal: [&str; 2],
    references: Vec<String>,
    steps: usize,
    lr: f64,
    seed: u64,
) -> TrainSchedule {
    TrainSchedule {
        architecture: arch,
        focal: [focal[0].into(), focal[1].into()],
        references,
        steps,
        batch_size: 16,
        loss_weights: LossWeights::default(),
        noise: NoiseConfig {
            p_drop: 0.1,
            shuffle_k: 1,
        },
        mlm: MlmConfig {
            enabled: true,
            mask_rate: 0.15,
            steps: 500,
        },
        seed,
        validate_every: 2000,
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
    }
}

fn score(
    tr: &munmt::schedules::Translator,
    pairs: &[(Vec<String>, Vec<String>)],
    src: &LangId,
    tgt: &LangId,
    flip: bool,
    n: usize,
) -> f64 {
    let mut hyps = Vec::new();
    let mut refs = Vec::new();
    for (a, b) in pairs.iter().take(n) {
        let (input, expect) = if flip { (b, a) } else { (a, b) };
        hyps.push(tr.translate(input, src, tgt).expect("tr"));
        refs.push(expect.clone());
    }
    evaluate(&hyps, &refs).expect("eval").bleu
}

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let which = args.first().map(|s| s.as_str()).unwrap_or("all");

    // ---------------- disjoint-script control on the related pair
    if which == "all" || which == "disjoint" {
        let dir = std::path::PathBuf::from("/tmp/probe6b");
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
            tests: vec![["relg".into(), "yy".into()]],
        };
        generate_world(&plan, &dir).expect("world");
        let corpora = CorporaPaths {
            mono: vec![
                MonoPath {
                    lang: "relg".into(),
                    path: "mono.relg.txt".into(),
                },
                MonoPath {
                    lang: "yy".into(),
                    path: "mono.yy.txt".into(),
                },
            ],
            parallel: vec![],
            validation: Some(ParallelPath {
                src_lang: "relg".into(),
                tgt_lang: "yy".into(),
                path: "test.relg-yy.tsv".into(),
            }),
        };
        let data = corpora.load(&dir).expect("load");
        let schedule = unsup_schedule(
            Architecture::UnsupervisedBaseline,
            ["relg", "yy"],
            vec![],
            12000,
            0.3,
            17,
        );
        let t0 = Instant::now();
        let outcome = train(&schedule, &data).expect("train");
        let val = data.validation.as_ref().unwrap();
        let relg = LangId::new("relg");
        let yy = LangId::new("yy");
        println!(
            "disjoint\trelg->yy {:.2}  yy->relg {:.2}\t{:.0}s",
            score(&outcome.translator, &val.pairs, &relg, &yy, false, 200),
            score(&outcome.translator, &val.pairs, &yy, &relg, true, 200),
            t0.elapsed().as_secs_f64()
        );
    }

    // ---------------- reference-ordering world
    if which == "all" || which == "worldc" {
        let dir = std::path::PathBuf::from("/tmp/probe6c");
        let _ = std::fs::remove_dir_all(&dir);
        let mut derive = vec![DerivePlan::Distant {
            name: "xx".into(),
            inventory: "greek".into(),
        }];
        for (s, name) in [(0.3, "rel30"), (0.6, "rel60"), (0.9, "rel90")] {
            derive.push(DerivePlan::Related {
                name: name.into(),
                strength: s,
                inventory: None,
            });
        }
        let plan = WorldPlan {
            spec: SynthSpec {
                vocab_size: 40,
                min_sentence_len: 3,
                max_sentence_len: 8,
                corpus_size: 2000,
                test_pairs: 500,
                markov_order: 1,
                base_inventory: "aeiklmnorstu".into(),
                seed: 10,
            },
            base: "yy".into(),
            derive,
            parallel: vec![
                ParallelPlan {
                    src: "xx".into(),
                    tgt: "rel30".into(),
                    count: 1500,
                    salt: 31,
                },
                ParallelPlan {
                    src: "xx".into(),
                    tgt: "rel60".into(),
                    count: 1500,
                    salt: 32,
                },
                ParallelPlan {
                    src: "xx".into(),
                    tgt: "rel90".into(),
                    count: 1500,
                    salt: 33,
                },
            ],
            tests: vec![["xx".into(), "yy".into()]],
        };
        generate_world(&plan, &dir).expect("world");
        let xx = LangId::new("xx");
        let yy = LangId::new("yy");

        let run = |arch: Architecture, reference: &str, steps: usize, label: &str| {
            let corpora = CorporaPaths {
                mono: vec![
                    MonoPath {
                        lang: "yy".into(),
                        path: "mono.yy.txt".into(),
                    },
                    MonoPath {
                        lang: reference.into(),
                        path: format!("mono.{reference}.txt"),
                    },
                ],
                parallel: vec![ParallelPath {
                    src_lang: "xx".into(),
                    tgt_lang: reference.into(),
                    path: format!("parallel.xx-{reference}.tsv"),
                }],
                validation: Some(ParallelPath {
                    src_lang: "xx".into(),
                    tgt_lang: "yy".into(),
                    path: "test.xx-yy.tsv".into(),
                }),
            };
            let data = corpora.load(&dir).expect("load");
            let schedule = unsup_schedule(
                arch,
                ["xx", "yy"],
                vec![reference.into()],
                steps,
                0.3,
                27,
            );
            let t0 = Instant::now();
            let outcome = train(&schedule, &data).expect("train");
            let val = data.validation.as_ref().unwrap();
            let xy = score(&outcome.translator, &val.pairs, &xx, &yy, false, 200);
            let yx = score(&outcome.translator, &val.pairs, &yy, &xx, true, 200);
            let vals: Vec<String> = outcome
                .log
                .iter()
                .filter(|e| e.term == "val_bleu")
                .map(|e| format!("{:.1}", e.value))
                .collect();
            println!(
                "{label}\txx->yy {xy:.2}  yy->xx {yx:.2}\t{:.0}s\tval [{}]",
                t0.elapsed().as_secs_f64(),
                vals.join(", ")
            );
        };

        for (reference, steps) in [("rel30", 16000), ("rel60", 16000), ("rel90", 16000)] {
            run(
                Architecture::UnsupSimilarCt,
                reference,
                steps,
                &format!("ct_{reference}"),
            );
        }
        run(Architecture::UnsupSimilar, "rel30", 16000, "plain_rel30");
    }
}
