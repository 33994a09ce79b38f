//! Seeded synthetic evaluation corpora.

use oowm_core::eval::EvalRecord;
use oowm_core::reward::Paradigm;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

const MESSY: &[&str] = &[
    "clothes piled on the bed",
    "dishes stacked on the desk",
    "papers scattered on the floor",
    "shoes blocking the doorway",
    "toys under the sofa",
    "crumbs across the kitchen counter",
    "towels dropped in the bathroom",
    "cables tangled behind the television",
];
const PRIORITY: &[&str] = &[
    "remove food waste first",
    "clear the walkway before anything else",
    "handle fragile items early",
    "put away clothes before dusting",
    "empty the trash before mopping",
    "finish surfaces before the floor",
];
const STEPS: &[&str] = &[
    "fold each shirt and place it in the drawer",
    "carry the dishes to the sink",
    "stack the papers into one pile",
    "pair the shoes and set them on the rack",
    "drop the toys into the toy chest",
    "wipe the counter with a damp cloth",
    "hang the towels on the rail",
    "bundle the cables with velcro ties",
    "vacuum the carpet in straight strips",
    "mop the tiles near the entrance",
    "empty the bin into the outdoor container",
    "dust the bookshelf from top to bottom",
];
const UNRELATED: &[&str] = &[
    "water the garden plants",
    "polish silver cutlery",
    "replace the smoke alarm battery",
    "oil squeaky hinges",
    "defrost freezer compartment",
];

fn pick(pool: &[&str], rng: &mut StdRng, lo: usize, hi: usize) -> Vec<String> {
    let n = rng.random_range(lo..hi);
    let mut items: Vec<&str> = pool.to_vec();
    items.shuffle(rng);
    items.into_iter().take(n).map(str::to_string).collect()
}

/// Rewords a phrase so it keeps some tokens: swap a word or drop one.
fn paraphrase(text: &str, rng: &mut StdRng) -> String {
    let mut words: Vec<&str> = text.split(' ').collect();
    let at = rng.random_range(0..words.len());
    if rng.random_bool(0.5) && words.len() > 2 {
        words.remove(at);
    } else {
        words[at] = ["carefully", "quickly", "then", "again"][rng.random_range(0..4)];
    }
    words.join(" ")
}

fn render(partitions: &[(&str, Vec<String>)], loop_steps: bool) -> String {
    let mut out = String::from("@startuml\nstart\n");
    for (name, actions) in partitions {
        out.push_str(&format!("partition \"{name}\" {{\n"));
        let looped = loop_steps && *name == "Specific Steps" && actions.len() >= 2;
        if looped {
            out.push_str("  while (items remain?) is (yes)\n");
            for a in &actions[..2] {
                out.push_str(&format!("    :{a};\n"));
            }
            out.push_str("  endwhile (no)\n");
            for a in &actions[2..] {
                out.push_str(&format!("  :{a};\n"));
            }
        } else {
            for a in actions {
                out.push_str(&format!("  :{a};\n"));
            }
        }
        out.push_str("}\n");
    }
    out.push_str("stop\n@enduml");
    out
}

fn perturb(actions: &[String], rng: &mut StdRng) -> Vec<String> {
    let mut out = Vec::new();
    for a in actions {
        match rng.random_range(0..10) {
            0..=4 => out.push(a.clone()),
            5..=6 => out.push(paraphrase(a, rng)),
            7 => out.push(UNRELATED[rng.random_range(0..UNRELATED.len())].to_string()),
            _ => {}
        }
    }
    if rng.random_bool(0.3) {
        out.push(UNRELATED[rng.random_range(0..UNRELATED.len())].to_string());
    }
    out.shuffle(rng);
    out
}

/// Builds `n` records mixing faithful, perturbed, partial, broken and
/// text-paradigm predictions.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<EvalRecord> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let reference = vec![
                ("Messy Areas", pick(MESSY, &mut rng, 1, 4)),
                ("Priority Order", pick(PRIORITY, &mut rng, 1, 3)),
                ("Specific Steps", pick(STEPS, &mut rng, 2, 6)),
            ];
            let mut predicted: Vec<(&str, Vec<String>)> = reference
                .iter()
                .map(|(name, actions)| (*name, perturb(actions, &mut rng)))
                .collect();
            if rng.random_bool(0.15) {
                let drop = rng.random_range(0..predicted.len());
                predicted.remove(drop);
            }
            let loops = rng.random_bool(0.5);
            let reference_text = render(&reference, true);
            let mut diagram = render(&predicted, loops);
            let kind = rng.random_range(0..20);
            if kind == 0 {
                diagram = diagram.replace("@enduml", "");
            }
            let text_paradigm = kind == 1 || kind == 2;
            let prediction = if text_paradigm {
                "<think>plan</think><answer>First tidy up, then clean.</answer>".to_string()
            } else if kind == 3 {
                diagram.clone()
            } else {
                format!("<think>survey the room</think><answer>{diagram}</answer>")
            };
            EvalRecord {
                id: format!("rec-{i:03}"),
                prediction,
                reference: reference_text,
                paradigm: if text_paradigm {
                    Paradigm::Text
                } else {
                    Paradigm::Oowm
                },
                prediction_structured: text_paradigm.then(|| diagram.clone()),
                split: None,
            }
        })
        .collect()
}

pub fn to_jsonl(records: &[EvalRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).unwrap() + "\n")
        .collect()
}
