use std::fs;
use std::path::Path;
use std::time::Instant;

use advframe::checkpoint;
use advframe::cli::{run, Cli};
use advframe::clusters::parse_cluster_model;
use advframe::formats::{load_corpus, load_lexicon};
use advframe::Error;
use advframe_core::corpus::extract_instances;
use advframe_core::numerics::Parameterized;
use clap::Parser;

fn cli(args: &[&str]) -> advframe::Result<()> {
    run(Cli::try_parse_from(std::iter::once("advframe").chain(args.iter().copied())).expect("valid arguments"))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Two domains of `sentences` each; the second is held out.
fn gen_data(dir: &Path, sentences: usize) {
    cli(&["gen", "--out", p(dir), "--domains", "2", "--sentences", &sentences.to_string(), "--seed", "7", "--set", "heldout_domains=1"]).unwrap();
}

fn config(dir: &Path, data: &Path, extra: &str) -> std::path::PathBuf {
    let text = format!(
        "train = {0}/train.txt\ntest = {0}/test_in.txt\nlexicon = {0}/lexicon.txt\nvectors = {0}/vectors.txt\n\
         hidden = 8\nlayers = 1\nfeature_dim = 4\nepochs = 3\nbatch_size = 4\nlearning_rate = 0.2\nclusters = 2\nrestarts = 3\n{extra}",
        data.display()
    );
    let path = dir.join("config.txt");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn gen_is_deterministic_and_self_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    gen_data(&a, 40);
    gen_data(&b, 40);
    for f in ["corpus.txt", "lexicon.txt", "vectors.txt", "train.txt", "test_in.txt", "test_out.txt", "summary.txt"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let lex = load_lexicon(&a.join("lexicon.txt")).unwrap();
    lex.validate().unwrap();
    let corpus = load_corpus(&a.join("corpus.txt")).unwrap();
    let n = extract_instances(&corpus, &lex).unwrap().len();
    let summary = fs::read_to_string(a.join("summary.txt")).unwrap();
    assert!(summary.contains(&format!("corpus sentences 80 instances {n}\n")), "{summary}");
}

#[test]
fn pipeline_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_data(&data, 40);
    let cfg = config(tmp.path(), &data, "");
    let run_dir = tmp.path().join("run");
    let args = |cmd: &'static str| vec![cmd, "--config", p(&cfg), "--out", p(&run_dir)];

    let mut train = args("train");
    train.extend(["--domains", "inferred"]);
    cli(&train).unwrap();
    let clusters = parse_cluster_model(&fs::read_to_string(run_dir.join("clusters.txt")).unwrap()).unwrap();
    assert_eq!(clusters.k(), 2);
    assert!(run_dir.join("resolved_config.txt").exists());

    cli(&args("sweep")).unwrap();
    let curve = fs::read_to_string(run_dir.join("curve.csv")).unwrap();
    for level in ["target", "frame", "argument"] {
        assert_eq!(curve.lines().filter(|l| l.starts_with(&format!("{level},"))).count(), 13);
    }
    assert!(fs::read_to_string(run_dir.join("fmax.txt")).unwrap().contains("argument_fmax="));

    // Scoring the training file reproduces the logged training F1.
    let train_file = data.join("train.txt");
    let mut eval = args("eval");
    eval.extend(["--corpus", p(&train_file)]);
    cli(&eval).unwrap();
    let csv = fs::read_to_string(run_dir.join("eval.csv")).unwrap();
    let arg_f1: f64 = csv.lines().find(|l| l.starts_with("argument,")).unwrap().rsplit(',').next().unwrap().parse().unwrap();
    let log = fs::read_to_string(run_dir.join("train_log.csv")).unwrap();
    let last_f1: f64 = log.lines().last().unwrap().rsplit(',').next().unwrap().parse().unwrap();
    assert!(arg_f1 >= last_f1 - 1e-9, "{arg_f1} < {last_f1}");

    cli(&args("breakdown")).unwrap();
    let rows: Vec<Vec<String>> = fs::read_to_string(run_dir.join("breakdown.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    let tp = |factor: &str| rows.iter().find(|r| r[0] == factor).unwrap()[2].parse::<usize>().unwrap();
    assert_eq!(tp("core FE") + tp("non-core FE"), tp("overall"));

    cli(&args("decode")).unwrap();
    let decoded = load_corpus(&run_dir.join("decoded.txt")).unwrap();
    assert_eq!(decoded.len(), load_corpus(&data.join("test_in.txt")).unwrap().len());
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_data(&data, 20);
    let cfg = config(tmp.path(), &data, "threads = 1\n");
    for out in ["r1", "r2"] {
        let dir = tmp.path().join(out);
        cli(&["train", "--config", p(&cfg), "--out", p(&dir), "--domains", "gold"]).unwrap();
        cli(&["sweep", "--config", p(&cfg), "--out", p(&dir)]).unwrap();
    }
    for f in ["train_log.csv", "curve.csv", "fmax.txt", "checkpoint.bin", "checkpoint.json", "resolved_config.txt"] {
        let a = fs::read(tmp.path().join("r1").join(f)).unwrap();
        let b = fs::read(tmp.path().join("r2").join(f)).unwrap();
        if f == "resolved_config.txt" {
            let strip = |x: Vec<u8>| String::from_utf8(x).unwrap().lines().filter(|l| !l.starts_with("out ")).collect::<Vec<_>>().join("\n");
            assert_eq!(strip(a), strip(b));
        } else {
            assert_eq!(a, b, "{f}");
        }
    }
}

#[test]
fn zero_lambda_adversary_leaves_the_parser_unchanged() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_data(&data, 20);
    let cfg = config(tmp.path(), &data, "");
    let (none, adv) = (tmp.path().join("none"), tmp.path().join("adv"));
    cli(&["train", "--config", p(&cfg), "--out", p(&none), "--domains", "none"]).unwrap();
    cli(&["train", "--config", p(&cfg), "--out", p(&adv), "--domains", "inferred", "--set", "fixed_lambda=0"]).unwrap();
    let (m1, h1) = checkpoint::load(&none).unwrap();
    let (m2, h2) = checkpoint::load(&adv).unwrap();
    assert!(h1.is_none() && h2.is_some());
    let bits = |m: &advframe_core::tagger::ParserModel| {
        m.params().iter().flat_map(|p| p.value.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>()).collect::<Vec<_>>()
    };
    assert_eq!(bits(&m1), bits(&m2));
}

#[test]
fn configuration_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    gen_data(&data, 10);
    let cfg = config(tmp.path(), &data, "");
    let out = tmp.path().join("x");
    assert!(matches!(cli(&["train", "--config", p(&cfg), "--out", p(&out), "--set", "bogus=1"]), Err(Error::Config(_))));

    // Gold domains need `#domain` on every sentence.
    let bare = fs::read_to_string(data.join("train.txt")).unwrap().lines().filter(|l| !l.starts_with("#domain")).collect::<Vec<_>>().join("\n");
    let bare_path = tmp.path().join("bare.txt");
    fs::write(&bare_path, bare + "\n").unwrap();
    let train = format!("train={}", p(&bare_path));
    let r = cli(&["train", "--config", p(&cfg), "--out", p(&out), "--domains", "gold", "--set", &train]);
    assert!(matches!(r, Err(Error::Config(_))), "{r:?}");

    // A checkpoint scored against a lexicon with other labels.
    cli(&["train", "--config", p(&cfg), "--out", p(&out), "--set", "epochs=1"]).unwrap();
    let lex = fs::read_to_string(data.join("lexicon.txt")).unwrap();
    let other = tmp.path().join("other_lexicon.txt");
    fs::write(&other, format!("{lex}frame Extra\nfe Extra_role core\n")).unwrap();
    let lex_set = format!("lexicon={}", p(&other));
    let r = cli(&["eval", "--config", p(&cfg), "--out", p(&out), "--set", &lex_set]);
    assert!(matches!(r, Err(Error::Version(_))), "{r:?}");
}

#[test]
fn toy_run_fits_the_time_budget() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    cli(&["gen", "--out", p(&data), "--domains", "2", "--sentences", "100", "--seed", "1"]).unwrap();
    let cfg = config(tmp.path(), &data, "hidden = 32\nlayers = 4\nfeature_dim = 8\nepochs = 30\nbatch_size = 16\nlearning_rate = 0.05\n");
    let start = Instant::now();
    cli(&["train", "--config", p(&cfg), "--out", p(&tmp.path().join("run")), "--domains", "inferred", "--threads", "1"]).unwrap();
    assert!(start.elapsed().as_secs() < 300);
}
