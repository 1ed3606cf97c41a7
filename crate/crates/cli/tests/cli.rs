use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use slicevec::analysis::{Key, Mode};
use slicevec::midi::write_format0;
use slicevec::pipeline::load_midi_dir;
use slicevec::synth::key_from_file_name;
use slicevec::NoteEvent;

fn slicevec(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slicevec"))
        .args(args)
        .current_dir(dir)
        .env_remove("SLICEVEC_CONFIG")
        .output()
        .expect("run slicevec")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(
        o.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        stdout(&o),
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

const FAST: &[&str] = &["--dims", "8", "--steps", "400", "--checkpoint-every", "100", "--batch-size", "32"];

#[test]
fn synth_writes_twelve_keys_times_pieces() {
    let dir = tempfile::tempdir().unwrap();
    ok(slicevec(dir.path(), &["synth", "--out", "m", "--pieces-per-key", "3", "--beats", "8"]));
    let names: Vec<String> = fs::read_dir(dir.path().join("m"))
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 36);
    assert!(names.iter().all(|n| key_from_file_name(n).is_some()));
}

#[test]
fn synth_single_key_is_diatonic() {
    let dir = tempfile::tempdir().unwrap();
    ok(slicevec(dir.path(), &["synth", "--out", "m", "--keys", "Eb", "--pieces-per-key", "2"]));
    let report = load_midi_dir(&dir.path().join("m")).unwrap();
    assert_eq!(report.pieces.len(), 2);
    let scale = Key::new(3, Mode::Major).scale();
    for p in &report.pieces {
        assert_eq!(p.key(), Some(Key::new(3, Mode::Major)));
        for s in &p.slices {
            assert!(s.pitch_classes().all(|pc| scale.contains(pc)), "{s}");
        }
    }
}

#[test]
fn synth_rejects_an_empty_key_list() {
    let dir = tempfile::tempdir().unwrap();
    let o = slicevec(dir.path(), &["synth", "--out", "m", "--keys", ","]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ingest_single_note_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("in")).unwrap();
    // One quarter note then a beat of silence.
    let bytes = write_format0(96, &[NoteEvent::new(62, 0, 96, 0)], 192, 64);
    fs::write(dir.path().join("in/one.mid"), bytes).unwrap();
    let out = stdout(&ok(slicevec(dir.path(), &["ingest", "--corpus-dir", "in"])));
    assert!(out.contains("pieces: 1\n"), "{out}");
    assert!(out.contains("unique slices: 2\n"), "{out}");
    let stats = stdout(&ok(slicevec(dir.path(), &["stats"])));
    assert!(stats.contains("slices: 2\n"), "{stats}");
}

#[test]
fn ingest_without_parseable_files_fails_with_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("in")).unwrap();
    fs::write(dir.path().join("in/bad.mid"), b"RIFF").unwrap();
    let o = slicevec(dir.path(), &["ingest", "--corpus-dir", "in"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn usage_and_config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(slicevec(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(slicevec(dir.path(), &["train", "--window", "3"]).status.code(), Some(1));
    fs::write(dir.path().join("bad.conf"), "dims 4\n").unwrap();
    assert_eq!(slicevec(dir.path(), &["--config", "bad.conf", "stats"]).status.code(), Some(1));
    assert_eq!(slicevec(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn flag_overrides_config_file_and_env_names_the_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.conf"), "# test\nvocab-size = 42\nseed = 5\n").unwrap();
    let o = ok(Command::new(env!("CARGO_BIN_EXE_slicevec"))
        .args(["--seed", "6", "synth", "--out", "m", "--keys", "C", "--pieces-per-key", "1", "--beats", "4"])
        .current_dir(dir.path())
        .env("SLICEVEC_CONFIG", "run.conf")
        .output()
        .unwrap());
    let dump = String::from_utf8_lossy(&o.stderr);
    assert!(dump.contains("vocab-size = 42\n"), "{dump}");
    assert!(dump.contains("seed = 6\n"), "{dump}");
    assert!(dump.contains("dims = 256\n"), "{dump}");
}

#[test]
fn numerical_blow_up_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    ok(slicevec(dir.path(), &["synth", "--out", "m", "--keys", "C", "--pieces-per-key", "1", "--beats", "16"]));
    ok(slicevec(dir.path(), &["ingest", "--corpus-dir", "m"]));
    let mut args = vec!["train", "--learning-rate", "1e300"];
    args.extend_from_slice(FAST);
    let o = slicevec(dir.path(), &args);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

fn pipeline_outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    ok(slicevec(dir, &["synth", "--out", "m", "--pieces-per-key", "2", "--beats", "24"]));
    ok(slicevec(dir, &["ingest", "--corpus-dir", "m"]));
    let mut train = vec!["train"];
    train.extend_from_slice(FAST);
    ok(slicevec(dir, &train));
    ok(slicevec(dir, &["analyze", "keys", "--corpus-dir", "m", "--out", "keys.csv"]));
    ok(slicevec(dir, &["analyze", "analogy", "--pair", "I,vi", "--out", "analogy.csv"]));
    ok(slicevec(dir, &["analyze", "chords", "--tonics", "C,G,F", "--out", "chords.csv"]));
    ok(slicevec(
        dir,
        &["generate", "--input", "m/A-minor_01.mid", "--output", "out.mid", "--diagnostics", "diag.csv", "--top-n", "5"],
    ));
    let names = [
        "corpus.txt",
        "vocab.txt",
        "embeddings.txt",
        "loss.csv",
        "keys.csv",
        "analogy.csv",
        "chords.csv",
        "out.mid",
        "diag.csv",
    ];
    names
        .iter()
        .map(|n| (n.to_string(), fs::read(dir.join(n)).unwrap()))
        .collect()
}

#[test]
fn full_pipeline_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (pipeline_outputs(a.path()), pipeline_outputs(b.path()));
    for ((name, x), (_, y)) in ra.iter().zip(&rb) {
        assert!(x == y, "{name} differs between runs");
    }
    let diag = String::from_utf8(ra[8].1.clone()).unwrap();
    assert!(diag.starts_with("beat,original,substitute,cosine_distance,top_n\n1,"));
    assert_eq!(diag.lines().count(), 25);
    let keys = String::from_utf8(ra[4].1.clone()).unwrap();
    assert!(keys.lines().nth(1).unwrap().starts_with(",C,G,D,A,E,B,F#,Db,Ab,Eb,Bb,F"));
}
