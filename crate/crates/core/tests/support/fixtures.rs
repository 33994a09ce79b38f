use std::fs;
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::Rng;

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

fn read_dir_sorted(dir: &Path) -> Vec<(PathBuf, String)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap_or_else(|e| panic!("reading {}: {e}", dir.display()))
        .map(|entry| entry.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "puml"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = fs::read_to_string(&p).unwrap();
            (p, text)
        })
        .collect()
}

pub fn activity_fixtures() -> Vec<(PathBuf, String)> {
    read_dir_sorted(&fixture_root().join("activity"))
}

pub fn class_fixtures() -> Vec<(PathBuf, String)> {
    read_dir_sorted(&fixture_root().join("class"))
}

const NOISE_LINES: &[&str] = &[
    "}",
    "{",
    "endif",
    "else",
    "endwhile",
    "repeat",
    "repeat while (x?)",
    "while (more?)",
    "if (x?) then (yes)",
    "partition \"Specific Steps\" {",
    "partition",
    ":unterminated",
    ";",
    "@startuml",
    "@enduml",
    "note left",
    "end note",
    "/'",
    "'/",
    "class Foo {",
    "Foo <|-- Bar",
    "A \"1\" *-- \"*\" B : x",
    "|Lane|",
    "\u{0}\u{7f}",
    "((((",
];

/// Applies one to four random byte- or line-level edits.
pub fn mutate(source: &str, rng: &mut StdRng) -> String {
    let mut text = source.to_string();
    for _ in 0..rng.random_range(1..=4) {
        text = match rng.random_range(0..8) {
            0..=3 => mutate_lines(&text, rng),
            _ => mutate_bytes(&text, rng),
        };
    }
    text
}

fn mutate_lines(text: &str, rng: &mut StdRng) -> String {
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    if lines.is_empty() {
        lines.push(String::new());
    }
    let at = rng.random_range(0..lines.len());
    match rng.random_range(0..5) {
        0 => {
            lines.remove(at);
        }
        1 => {
            let copy = lines[at].clone();
            lines.insert(at, copy);
        }
        2 => {
            let other = rng.random_range(0..lines.len());
            lines.swap(at, other);
        }
        3 => {
            let noise = NOISE_LINES[rng.random_range(0..NOISE_LINES.len())];
            lines.insert(at, noise.to_string());
        }
        _ => lines.truncate(at),
    }
    lines.join("\n")
}

fn mutate_bytes(text: &str, rng: &mut StdRng) -> String {
    let mut bytes = text.as_bytes().to_vec();
    if bytes.is_empty() {
        bytes.push(b'x');
    }
    let at = rng.random_range(0..bytes.len());
    match rng.random_range(0..4) {
        0 => bytes[at] = rng.random(),
        1 => {
            bytes.remove(at);
        }
        2 => {
            let run: Vec<u8> = (0..rng.random_range(1..6)).map(|_| rng.random()).collect();
            bytes.splice(at..at, run);
        }
        _ => {
            let special = b"{}():;\"'|<>*o-.@\n"[rng.random_range(0..17)];
            bytes.insert(at, special);
        }
    }
    String::from_utf8_lossy(&bytes).into_owned()
}
