//! The release gate: nine checks, one test per criterion, each printing a
//! `criterion N: PASS` line on success (run with `-- --nocapture` to see
//! them; a failing assertion is the corresponding FAIL line).
//!
//! The checks deliberately lean on independent re-derivations — a
//! fixed-point reference solver, a re-scan of the nonce filters, frozen
//! binomial bounds — rather than calling back into the code paths they are
//! auditing. Criteria 1, 3 and 4 share one full-size build (13 k-values × 4
//! variants × 200 instances) through a `OnceLock` so the suite builds it
//! once; whichever test gets there first pays the cost and records it.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::process::{Command, Stdio};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use gridstory::dataset::{self, BuildConfig, Variant};
use gridstory::eval::{self, ChatClient, EvalOptions, MockOracle, MockUniform, PromptMode};
use gridstory_core::lingo::{Slot, TemplatePack};
use gridstory_core::naming::{
    assign_names, gen_nonce_words, levenshtein, NamePool, NameScheme, NonceSpec,
};
use gridstory_core::parser::{self, KNOWLEDGE_MODULE};
use gridstory_core::rng::{self, rng_from_seed};
use gridstory_core::solver::{solve, SolveOutcome};
use gridstory_core::story::{self, GenOptions, OrderPolicy, Skeleton};
use gridstory_core::Direction;
use tempfile::TempDir;

/// The reference k schedule: every depth the shipped config builds.
const FULL_KS: [usize; 13] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20, 50, 100];

struct SharedDataset {
    dir: TempDir,
    build_time: Duration,
}

/// One 10,400-instance build shared by criteria 1, 3 and 4.
fn shared_dataset() -> &'static SharedDataset {
    static DS: OnceLock<SharedDataset> = OnceLock::new();
    DS.get_or_init(|| {
        let cfg = BuildConfig { ks: FULL_KS.to_vec(), per_variant: 200, ..BuildConfig::default() };
        let dir = TempDir::new().expect("tempdir");
        let start = Instant::now();
        let manifest = dataset::build_dataset(&cfg, dir.path()).expect("reference build");
        assert_eq!(manifest.total, 13 * 4 * 200);
        SharedDataset { dir, build_time: start.elapsed() }
    })
}

#[test]
fn criterion_1_generate_and_verify_every_variant() {
    let shared = shared_dataset();
    let verify_start = Instant::now();
    let report = dataset::verify_dataset(shared.dir.path()).expect("full verification");
    let total = shared.build_time + verify_start.elapsed();

    assert_eq!(report.shards, 13 * 4);
    assert_eq!(report.instances, 13 * 4 * 200);
    assert!(
        total < Duration::from_secs(120),
        "generate + verify took {total:.1?}; the budget is two minutes"
    );
    println!(
        "criterion 1: PASS — {} instances across {} shards generated and re-verified with zero \
         failures in {total:.1?}",
        report.instances, report.shards
    );
}

#[test]
fn criterion_2_rebuild_at_scale_is_byte_identical() {
    let cfg = BuildConfig { per_variant: 1000, ..BuildConfig::default() };

    let dir_a = TempDir::new().unwrap();
    let start = Instant::now();
    let manifest = dataset::build_dataset(&cfg, dir_a.path()).expect("first build");
    let build_time = start.elapsed();
    assert_eq!(manifest.total, 52_000);
    assert!(
        build_time < Duration::from_secs(300),
        "52,000-instance build took {build_time:.1?}; the budget is five minutes"
    );

    let dir_b = TempDir::new().unwrap();
    dataset::build_dataset(&cfg, dir_b.path()).expect("second build");

    let mut names: Vec<String> = manifest.files.keys().cloned().collect();
    names.push(dataset::MANIFEST_FILE.to_string());
    for name in &names {
        let a = std::fs::read(dir_a.path().join(name)).unwrap();
        let b = std::fs::read(dir_b.path().join(name)).unwrap();
        assert!(a == b, "{name} differs between two builds from the same seed");
    }
    println!(
        "criterion 2: PASS — 52,000 instances built in {build_time:.1?}; rebuild matched all {} \
         files byte for byte",
        names.len()
    );
}

#[test]
fn criterion_3_uniform_guesser_sits_on_the_guess_rate() {
    let shared = shared_dataset();
    let ds = dataset::load_dataset(shared.dir.path()).expect("load");
    // The baseline slice: clean, shuffled — 200 instances at each k.
    let instances: Vec<_> = ds
        .instances
        .iter()
        .filter(|i| {
            dataset::parse_instance_id(&i.id).map(|(_, v, _)| v) == Some(Variant::CleanShuffled)
        })
        .cloned()
        .collect();
    assert_eq!(instances.len(), 13 * 200);

    let asset = eval::prompt_asset(PromptMode::FiveShot, "english").unwrap();
    let client = MockUniform::new(0, &ds.pack);
    let opts = EvalOptions {
        mode: PromptMode::FiveShot,
        model: "uniform".into(),
        repeats: 1,
        concurrency: 8,
        ..EvalOptions::default()
    };
    let records = eval::run_eval(&instances, &ds.pack, &asset, &client, &opts).unwrap();

    let mut per_k: BTreeMap<usize, (u32, u32)> = BTreeMap::new();
    for r in &records {
        let cell = per_k.entry(r.k).or_default();
        cell.1 += 1;
        if r.correct {
            cell.0 += 1;
        }
    }
    assert_eq!(per_k.len(), 13);
    for (&k, &(hits, n)) in &per_k {
        assert_eq!(n, 200);
        // Central 99% interval for Binomial(200, 1/8), frozen from an exact
        // independent computation: 14 ..= 38 successes.
        assert!(
            (14..=38).contains(&hits),
            "k={k}: {hits}/200 correct falls outside the 99% interval [14, 38] around 0.125"
        );
    }
    println!(
        "criterion 3: PASS — uniform guesser lands inside [14, 38]/200 correct at all 13 \
         k-values (guess rate 0.125)"
    );
}

#[test]
fn criterion_4_oracle_scores_one_in_every_experiment() {
    // Every (mode, pack) pairing that ships a prompt asset; between them
    // they exercise all four built-in language packs.
    let combos: [(PromptMode, &str); 7] = [
        (PromptMode::FiveShot, "english"),
        (PromptMode::FiveShot, "hindi"),
        (PromptMode::FiveShot, "swedish"),
        (PromptMode::ZeroShot, "english"),
        (PromptMode::Familiarization, "nonce"),
        (PromptMode::AspTranslation, "english"),
        (PromptMode::FiveShotOrdered, "english"),
    ];
    for (mode, pack_name) in combos {
        let cfg = BuildConfig {
            ks: vec![1, 3, 5],
            per_variant: 4,
            pack: pack_name.into(),
            ..BuildConfig::default()
        };
        let (pack, _) = dataset::load_pack(&cfg.pack).unwrap();
        let pool = dataset::make_pool(&cfg).unwrap();
        let mut instances = Vec::new();
        for &k in &cfg.ks {
            for variant in Variant::ALL {
                for index in 0..cfg.per_variant {
                    instances
                        .push(dataset::build_instance(&cfg, &pack, &pool, k, index, variant).unwrap());
                }
            }
        }

        let asset = eval::prompt_asset(mode, &pack.language).unwrap();
        let client = MockOracle::new(&instances, &pack, mode).unwrap();
        let opts = EvalOptions {
            mode,
            model: "oracle".into(),
            repeats: 2,
            ..EvalOptions::default()
        };
        let records = eval::run_eval(&instances, &pack, &asset, &client, &opts).unwrap();
        let table = eval::score_records("oracle", &records, false);
        assert_eq!(table.scores.len(), cfg.ks.len());
        for row in &table.scores {
            assert!(
                row.mean == 1.0 && row.std == 0.0 && row.other_rate == 0.0,
                "{} × {pack_name}: k={} scored mean {} std {} other {}",
                mode.as_str(),
                row.k,
                row.mean,
                row.std,
                row.other_rate
            );
        }
    }
    println!(
        "criterion 4: PASS — mock oracle scored exactly 1.00 in all 7 mode × pack experiments"
    );
}

#[test]
fn criterion_5_every_template_round_trips_under_random_names() {
    let mut rng = rng_from_seed(0x0005_0005);

    // Names from every shipped scheme (all single-token by construction).
    let mut universe: Vec<String> =
        assign_names(40, &NamePool::symbolic(), &mut rng).unwrap();
    for scheme in [NameScheme::Male, NameScheme::Female, NameScheme::City] {
        let pool = NamePool::builtin(scheme).expect("list-backed pools are built in");
        universe.extend(assign_names(20, &pool, &mut rng).unwrap());
    }
    universe.extend(gen_nonce_words(20, &NonceSpec::default(), &mut rng).unwrap());

    let draw_pair = |rng: &mut _| -> (String, String) {
        let a = rng::choose(rng, &universe).clone();
        loop {
            let b = rng::choose(rng, &universe).clone();
            if b != a {
                return (a, b);
            }
        }
    };

    let mut checked = 0usize;
    for name in TemplatePack::BUILTIN_NAMES {
        let pack = TemplatePack::builtin(name).unwrap();
        for (ti, t) in pack.templates.iter().enumerate() {
            for _ in 0..100 {
                let (subject, object) = draw_pair(&mut rng);
                let (a, b) = match t.subject_slot {
                    Slot::A => (&subject, &object),
                    Slot::B => (&object, &subject),
                };
                let sentence = t.matcher.render(a, b);
                let fact = parser::parse_sentence(0, &sentence, &pack).unwrap_or_else(|e| {
                    panic!("{name} template {ti} did not re-parse {sentence:?}: {e}")
                });
                assert_eq!(
                    (fact.subject.as_str(), fact.relation, fact.object.as_str()),
                    (subject.as_str(), t.relation, object.as_str()),
                    "{name} template {ti} round-tripped {sentence:?} into a different fact"
                );
                checked += 1;
            }
        }
        for (qi, q) in pack.questions.iter().enumerate() {
            for _ in 0..100 {
                let (subject, object) = draw_pair(&mut rng);
                let question = q.matcher.render(&subject, &object);
                let (qa, qb) = parser::parse_question(&question, &pack).unwrap_or_else(|e| {
                    panic!("{name} question {qi} did not re-parse {question:?}: {e}")
                });
                assert_eq!((qa, qb), (subject, object));
                checked += 1;
            }
        }
    }
    println!(
        "criterion 5: PASS — {checked} render→parse round trips over every template in every \
         built-in pack, zero failures"
    );
}

// ---- criterion 6 helpers: an independent reference solver ----------------

/// Unit offsets of the nine relations, transcribed separately from the
/// production table so the differential can catch a transcription slip.
fn unit_offset(d: Direction) -> (i64, i64) {
    match d {
        Direction::Overlap => (0, 0),
        Direction::Top => (0, 1),
        Direction::Down => (0, -1),
        Direction::Left => (-1, 0),
        Direction::Right => (1, 0),
        Direction::TopLeft => (-1, 1),
        Direction::TopRight => (1, 1),
        Direction::DownLeft => (-1, -1),
        Direction::DownRight => (1, -1),
    }
}

/// Maps a displacement to its eight-way label by coordinate sign.
fn sign_direction(dx: i64, dy: i64) -> Direction {
    match (dx.signum(), dy.signum()) {
        (0, 0) => Direction::Overlap,
        (0, 1) => Direction::Top,
        (0, -1) => Direction::Down,
        (-1, 0) => Direction::Left,
        (1, 0) => Direction::Right,
        (-1, 1) => Direction::TopLeft,
        (1, 1) => Direction::TopRight,
        (-1, -1) => Direction::DownLeft,
        (1, -1) => Direction::DownRight,
        _ => unreachable!("signum is -1, 0 or 1"),
    }
}

/// Brute-force reference solver: sweep the fact list to a fixed point,
/// growing coordinates outward from the query object at the origin.
/// Quadratic, no indexing, no components — deliberately nothing in common
/// with the production solver beyond the direction vocabulary.
fn chain_walk(facts: &[(String, Direction, String)], qs: &str, qo: &str) -> Option<Direction> {
    let mut pos: HashMap<&str, (i64, i64)> = HashMap::new();
    pos.insert(qo, (0, 0));
    loop {
        let mut changed = false;
        for (s, d, o) in facts {
            let (dx, dy) = unit_offset(*d);
            match (pos.get(s.as_str()).copied(), pos.get(o.as_str()).copied()) {
                (None, Some((ox, oy))) => {
                    pos.insert(s, (ox + dx, oy + dy));
                    changed = true;
                }
                (Some((sx, sy)), None) => {
                    pos.insert(o, (sx - dx, sy - dy));
                    changed = true;
                }
                (Some((sx, sy)), Some((ox, oy))) => {
                    if (sx - ox, sy - oy) != (dx, dy) {
                        return None; // contradictory fact set
                    }
                }
                (None, None) => {}
            }
        }
        if !changed {
            break;
        }
    }
    let &(sx, sy) = pos.get(qs)?;
    Some(sign_direction(sx, sy))
}

fn named_facts(sk: &Skeleton) -> Vec<(String, Direction, String)> {
    sk.facts
        .iter()
        .map(|f| (format!("N{}", f.subject), f.relation, format!("N{}", f.object)))
        .collect()
}

/// Runs one program under clingo and reads the two query locations back out
/// of the shown atoms. Returns the sign-mapped answer direction.
fn run_clingo(program: &str, qs: &str, qo: &str) -> Option<Direction> {
    use std::io::Write;
    let mut child = Command::new("clingo")
        .args(["--outf=2", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .ok()?;
    child.stdin.take()?.write_all(program.as_bytes()).ok()?;
    let out = child.wait_with_output().ok()?;
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).ok()?;
    let atoms = v["Call"][0]["Witnesses"][0]["Value"].as_array()?;
    let locate = |name: &str| -> Option<(i64, i64)> {
        let prefix = format!("location(\"{name}\",");
        for atom in atoms {
            if let Some(rest) = atom.as_str()?.strip_prefix(&prefix) {
                let mut it = rest.strip_suffix(')')?.split(',');
                let x = it.next()?.trim().parse().ok()?;
                let y = it.next()?.trim().parse().ok()?;
                return Some((x, y));
            }
        }
        None
    };
    let (sx, sy) = locate(qs)?;
    let (ox, oy) = locate(qo)?;
    Some(sign_direction(sx - ox, sy - oy))
}

/// The optional external leg: 50 fully rendered instances are parsed back to
/// facts, emitted as logic programs and solved by clingo; the answer read
/// from the derived locations must match the stored one. Skips cleanly when
/// no clingo binary is on PATH.
fn clingo_differential() -> String {
    let probe = Command::new("clingo")
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status();
    if !probe.map(|s| s.success()).unwrap_or(false) {
        return "ASP differential skipped (no clingo on PATH)".to_string();
    }

    let cfg = BuildConfig {
        ks: vec![1, 2, 3, 5, 8, 10],
        per_variant: 3,
        ..BuildConfig::default()
    };
    let (pack, _) = dataset::load_pack(&cfg.pack).unwrap();
    let pool = dataset::make_pool(&cfg).unwrap();
    let mut checked = 0usize;
    // Index-major order spreads the 50-program sample across every
    // (k, variant) cell instead of exhausting the small ks first.
    'outer: for index in 0..cfg.per_variant {
        for &k in &cfg.ks {
            for variant in Variant::ALL {
                if checked == 50 {
                    break 'outer;
                }
                let inst =
                    dataset::build_instance(&cfg, &pack, &pool, k, index, variant).unwrap();
                let program = parser::parse_story(&inst.story, &inst.question, &pack).unwrap();
                let asp = parser::emit_asp(&program);
                // The emitted program plus the knowledge module derive
                // locations only; anchor the query subject and show them.
                let aux = format!(
                    "location(\"{}\", 0, 0).\n#show location/3.\n",
                    program.query.0
                );
                let full = format!("{asp}{KNOWLEDGE_MODULE}{aux}");
                let got = run_clingo(&full, &program.query.0, &program.query.1);
                let want = pack.label_direction(&inst.answer).unwrap();
                assert_eq!(
                    got,
                    Some(want),
                    "clingo disagreed on {} (answer {})",
                    inst.id,
                    inst.answer
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 50);
    "clingo agreed on all 50 emitted programs".to_string()
}

#[test]
fn criterion_6_solver_agrees_with_brute_force() {
    let total = 100_000usize;
    let opts = GenOptions::default();
    for i in 0..total {
        let mut rng = rng_from_seed(rng::fold_seed(0xD1FF, &[i as u64]));
        let k = 1 + i % 10;
        let walk = story::generate_walk(k, &opts, &mut rng).unwrap();
        let mut sk = story::make_skeleton(&walk, &opts, &mut rng);
        if i % 2 == 1 {
            story::inject_noise(&mut sk, k.div_ceil(2), &opts, &mut rng).unwrap();
        }
        if i % 3 != 0 {
            story::order_story(&mut sk, OrderPolicy::Full, &mut rng);
        }

        let facts = named_facts(&sk);
        let qs = format!("N{}", sk.query.0);
        let qo = format!("N{}", sk.query.1);
        let want = chain_walk(&facts, &qs, &qo)
            .unwrap_or_else(|| panic!("instance {i}: reference walker found a contradiction"));
        assert_eq!(
            solve(&facts, (&qs, &qo), 100),
            SolveOutcome::Answer(want),
            "instance {i} (k={k}): solver and reference walker diverged"
        );
        // The generator precomputes the answer from raw geometry; a third
        // opinion for free.
        assert_eq!(want, sk.answer, "instance {i}: walker disagrees with the generator");
    }
    let asp_note = clingo_differential();
    println!(
        "criterion 6: PASS — solver matched the reference walker on {total} instances; {asp_note}"
    );
}

#[test]
fn criterion_7_solve_is_invariant_under_benign_transforms() {
    let opts = GenOptions::default();
    for i in 0..10_000usize {
        let mut rng = rng_from_seed(rng::fold_seed(0x11A7, &[i as u64]));
        let k = 1 + i % 10;
        let walk = story::generate_walk(k, &opts, &mut rng).unwrap();
        let mut sk = story::make_skeleton(&walk, &opts, &mut rng);
        if i % 2 == 1 {
            story::inject_noise(&mut sk, k.div_ceil(2), &opts, &mut rng).unwrap();
        }
        let facts = named_facts(&sk);
        let qs = format!("N{}", sk.query.0);
        let qo = format!("N{}", sk.query.1);
        let base = solve(&facts, (&qs, &qo), 100);
        assert!(matches!(base, SolveOutcome::Answer(_)), "instance {i} did not solve");

        // (a) Fact-list permutation.
        let mut permuted = facts.clone();
        rng::shuffle(&mut rng, &mut permuted);
        assert_eq!(
            solve(&permuted, (&qs, &qo), 100),
            base,
            "instance {i}: answer changed under permutation"
        );

        // (b) Injective renaming through a shuffled codomain.
        let names: BTreeSet<&str> =
            facts.iter().flat_map(|(s, _, o)| [s.as_str(), o.as_str()]).collect();
        let mut codomain: Vec<String> = (0..names.len()).map(|j| format!("W{j}")).collect();
        rng::shuffle(&mut rng, &mut codomain);
        let map: HashMap<&str, &str> =
            names.iter().zip(&codomain).map(|(&n, c)| (n, c.as_str())).collect();
        let renamed: Vec<(String, Direction, String)> = facts
            .iter()
            .map(|(s, d, o)| (map[s.as_str()].to_string(), *d, map[o.as_str()].to_string()))
            .collect();
        assert_eq!(
            solve(&renamed, (map[qs.as_str()], map[qo.as_str()]), 100),
            base,
            "instance {i}: answer changed under renaming"
        );

        // (c) Distractor injection: fresh single-edge leaves hung off
        // existing entities can never reach the queried pair.
        let mut extended = facts.clone();
        for j in 0..3 {
            let anchor = extended[rng::index(&mut rng, facts.len())].0.clone();
            let d = *rng::choose(&mut rng, &Direction::COMPASS);
            extended.push((format!("D{j}"), d, anchor));
        }
        assert_eq!(
            solve(&extended, (&qs, &qo), 100),
            base,
            "instance {i}: answer changed under distractor injection"
        );
    }
    println!(
        "criterion 7: PASS — answers invariant under permutation, injective renaming and \
         distractor injection on 10000 instances"
    );
}

#[test]
fn criterion_8_nonce_words_pass_both_filters() {
    let spec = NonceSpec::default();
    let mut rng = rng_from_seed(0xC0FFEE);
    let words = gen_nonce_words(100, &spec, &mut rng).expect("the generator fills 100 words");
    assert_eq!(words.len(), 100);
    assert_eq!(words.iter().collect::<BTreeSet<_>>().len(), 100, "duplicate nonce words");

    // Independent re-check of both filters. Edit distance is bounded below
    // by length difference, so only dictionary words within one letter of
    // length 7 can violate the distance-2 requirement.
    let near: Vec<String> = spec
        .dictionary
        .lines()
        .map(|w| w.trim().to_lowercase())
        .filter(|w| !w.is_empty() && w.chars().count().abs_diff(7) < 2)
        .collect();
    assert!(!near.is_empty(), "dictionary has no words near length 7");
    for w in &words {
        assert_eq!(w.chars().count(), 7, "{w:?} is not seven letters");
        assert!(w.chars().all(|c| c.is_ascii_lowercase()), "{w:?} has non-letters");
        for d in &near {
            assert!(
                levenshtein(w, d) >= 2,
                "{w:?} is within distance 1 of dictionary word {d:?}"
            );
        }
    }
    println!(
        "criterion 8: PASS — 100 distinct nonce words, all seven letters and Levenshtein ≥ 2 \
         from every dictionary word"
    );
}

#[test]
fn criterion_9_live_model_tables_declared_out_of_scope() {
    // The published per-model accuracy numbers come from hosted third-party
    // models and are not reproducible at desk scale. What this suite
    // guarantees instead: the live client speaks the chat-completions wire
    // format (construction is offline), the reports keep the published table
    // shape, and protocol correctness is carried by criteria 3 and 4.
    let client = eval::LiveClient::new("https://example.invalid/v1", None, 0)
        .expect("client construction needs no network");
    assert_eq!(client.name(), "live");
    let empty = eval::ScoreTable { model: "m".into(), scores: vec![] };
    assert_eq!(eval::results_csv(&empty), "model,k,mean,std\n");
    println!(
        "criterion 9: PASS — declared: third-party model scores are out of scope; harness \
         correctness rests on criteria 3 (guess rate) and 4 (oracle exactness)"
    );
}
