use smilescope_core::analysis::{
    gaze_blink_delta, modality_alignment, smile_rate_timeline, structure_syntax_rate_change,
    topic_smile_delta, valence_trajectories, AnalysisError, Facet, HumanValenceLabels,
    OverlapRule, PlotPoints, SmileIndex, Stratum, TopicOptions, TrajectoryOptions, ValenceSource,
};
use smilescope_core::corpus::{Corpus, Speaker};
use smilescope_core::narrative::{Structure, Topic, Valence, ValenceType};
use smilescope_core::smile::{SmileSegment, SmileSource};
use smilescope_core::synth::{generate_corpus, PlantedEffects, SynthConfig, SynthOutput};

fn synth(cfg: SynthConfig) -> SynthOutput {
    generate_corpus(&cfg).unwrap()
}

fn small(seed: u64) -> SynthConfig {
    SynthConfig {
        n_subjects: 4,
        duration: 300.0,
        fps: 5.0,
        seed,
        ..Default::default()
    }
}

fn seg(video: &str, start: f64, end: f64) -> SmileSegment {
    SmileSegment {
        video_id: video.into(),
        start,
        end,
        peak_au12: 2.0,
        mean_au12: 2.0,
        source: SmileSource::Detected,
        probability: None,
    }
}

/// Smiles every 30 s, i.e. exactly 2 per minute.
fn uniform_smiles(corpus: &Corpus) -> SmileIndex {
    corpus
        .videos
        .iter()
        .map(|v| {
            let n = (v.duration() / 30.0) as usize;
            let list = (0..n).map(|k| seg(&v.video_id, 15.0 + 30.0 * k as f64, 16.0 + 30.0 * k as f64)).collect();
            (v.video_id.clone(), list)
        })
        .collect()
}

#[test]
fn timeline_uniform_smiles_are_flat() {
    let out = synth(SynthConfig {
        n_subjects: 3,
        videos_per_subject: 2,
        ..small(0)
    });
    let r = smile_rate_timeline(&out.corpus, &uniform_smiles(&out.corpus), 5).unwrap();
    assert_eq!(r.n_subjects, 3);
    for b in &r.bins {
        assert!((b.mean_rate - 2.0).abs() < 1e-12, "{b:?}");
        assert!(b.sd_rate.abs() < 1e-12);
    }
}

#[test]
fn timeline_zero_smile_subject_and_mass_conservation() {
    let out = synth(small(1));
    let mut smiles = out.ledger.smile_segments();
    let first = out.corpus.videos[0].video_id.clone();
    smiles.insert(first, vec![]);
    let fine = smile_rate_timeline(&out.corpus, &smiles, 10).unwrap();
    assert!(fine.rates[0].iter().all(|&r| r == 0.0));
    let coarse = smile_rate_timeline(&out.corpus, &smiles, 5).unwrap();
    assert_eq!(coarse.bins.len() * 2, fine.bins.len());
    let minutes = 300.0 / 60.0;
    for s in 0..fine.rates.len() {
        let mass_fine: f64 = fine.rates[s].iter().map(|r| r * minutes / 10.0).sum();
        let mass_coarse: f64 = coarse.rates[s].iter().map(|r| r * minutes / 5.0).sum();
        assert!((mass_fine - mass_coarse).abs() < 1e-9);
    }
    assert!(matches!(
        smile_rate_timeline(&Corpus::default(), &smiles, 5),
        Err(AnalysisError::EmptyCorpus)
    ));
}

#[test]
fn topic_delta_zero_without_smiles() {
    let out = synth(small(2));
    let r = topic_smile_delta(&out.corpus, &SmileIndex::new(), TopicOptions::default()).unwrap();
    assert!(r.topics.iter().all(|t| t.delta == 0.0));
    assert!(r.baselines.values().all(|&b| b == 0.0));
}

#[test]
fn topic_delta_recovers_planted_topic() {
    let out = synth(SynthConfig {
        n_subjects: 6,
        duration: 600.0,
        effects: PlantedEffects {
            smile_topic: Some(Topic::Health),
            ..Default::default()
        },
        ..small(3)
    });
    let smiles = out.ledger.smile_segments();
    for strict_onset in [false, true] {
        let r = topic_smile_delta(
            &out.corpus,
            &smiles,
            TopicOptions {
                strict_onset,
                ..Default::default()
            },
        )
        .unwrap();
        for t in &r.topics {
            if t.topic == Topic::Health {
                assert!(t.delta > 0.0, "{t:?}");
            } else {
                assert!(t.delta <= 0.0, "{t:?}");
            }
        }
    }
}

#[test]
fn topic_delta_invariant_to_video_duplication() {
    let out = synth(small(4));
    let smiles = out.ledger.smile_segments();
    let a = topic_smile_delta(&out.corpus, &smiles, TopicOptions::default()).unwrap();
    let mut doubled = out.corpus.clone();
    doubled.videos.extend(out.corpus.videos.iter().cloned());
    let b = topic_smile_delta(&doubled, &smiles, TopicOptions::default()).unwrap();
    for (x, y) in a.topics.iter().zip(&b.topics) {
        assert!((x.delta - y.delta).abs() < 1e-12);
    }
}

#[test]
fn rate_change_recovers_planted_structure() {
    let out = synth(SynthConfig {
        n_subjects: 20,
        duration: 1200.0,
        effects: PlantedEffects {
            smile_structure: Some(Structure::Evaluation),
            ..Default::default()
        },
        ..small(5)
    });
    let r = structure_syntax_rate_change(&out.corpus, &out.ledger.smile_segments(), Facet::Structure, OverlapRule::Any)
        .unwrap();
    let eval = r.get("evaluation").unwrap();
    assert!(eval.pct_change.unwrap() > 50.0, "{eval:?}");
    assert!(eval.p_value.unwrap() < 0.01);
    for c in &r.categories {
        assert!(c.mean_rate_smile >= 0.0 && c.mean_rate_smile <= 1.0);
    }
}

#[test]
fn rate_change_excludes_subjects_without_smiles() {
    let out = synth(small(6));
    let mut smiles = out.ledger.smile_segments();
    let first = out.corpus.videos[0].clone();
    smiles.insert(first.video_id.clone(), vec![]);
    let r = structure_syntax_rate_change(&out.corpus, &smiles, Facet::Syntax, OverlapRule::Any).unwrap();
    assert_eq!(r.excluded_subjects, vec![first.subject_id]);
    assert_eq!(r.n_subjects, 3);
    assert!("tense".parse::<Facet>().is_err());
}

#[test]
fn trajectory_t0_difference_is_zero_for_the_filter() {
    for kind in [ValenceType::Narrative, ValenceType::Present] {
        let out = synth(SynthConfig {
            n_subjects: 6,
            duration: 900.0,
            smile_rate: 1.0,
            ..small(7)
        });
        let r = valence_trajectories(&out.corpus, &out.ledger.smile_segments(), &TrajectoryOptions::new(kind)).unwrap();
        assert!(r.smile_clusters > 0 && r.control_clusters > 0);
        let p = r.filter_series().at(0);
        assert_eq!(p.smile_mean.unwrap() - p.control_mean.unwrap(), 0.0);
        assert_eq!(r.filter_series().points.len(), 7);
    }
}

#[test]
fn trajectory_bump_is_monotone_in_delta() {
    let gap = |delta: f64| {
        let out = synth(SynthConfig {
            n_subjects: 10,
            duration: 1200.0,
            smile_rate: 0.6,
            effects: PlantedEffects {
                valence_bump: delta,
                bump_modalities: vec![smilescope_core::corpus::AffectModality::Audio],
                ..Default::default()
            },
            ..small(8)
        });
        let r = valence_trajectories(
            &out.corpus,
            &out.ledger.smile_segments(),
            &TrajectoryOptions::new(ValenceType::Narrative),
        )
        .unwrap();
        let p = r.modality(ValenceSource::Audio).unwrap().at(1);
        p.smile_mean.unwrap() - p.control_mean.unwrap()
    };
    let gaps: Vec<f64> = [0.0, 0.15, 0.3].iter().map(|&d| gap(d)).collect();
    assert!(gaps[0] < gaps[1] && gaps[1] < gaps[2], "{gaps:?}");
}

#[test]
fn trajectory_requires_annotations_and_tracks() {
    let out = synth(small(9));
    let mut bare = out.corpus.clone();
    for v in &mut bare.videos {
        for s in &mut v.transcript {
            s.annotation = None;
        }
    }
    let opts = TrajectoryOptions::new(ValenceType::Narrative);
    assert!(matches!(
        valence_trajectories(&bare, &SmileIndex::new(), &opts),
        Err(AnalysisError::MissingAnnotations(_))
    ));
    let mut no_gaze = out.corpus.clone();
    no_gaze.videos[0].gaze_affect = None;
    assert!(matches!(
        valence_trajectories(&no_gaze, &SmileIndex::new(), &opts),
        Err(AnalysisError::MissingModality { .. })
    ));
}

#[test]
fn gaze_delta_reports_missing_gaze() {
    let out = synth(small(10));
    let mut c = out.corpus.clone();
    c.videos[1].gaze = None;
    assert!(matches!(
        gaze_blink_delta(&c, &out.ledger.smile_segments()),
        Err(AnalysisError::MissingGaze(_))
    ));
}

#[test]
fn gaze_suppression_shows_in_positive_stratum() {
    let out = synth(SynthConfig {
        n_subjects: 10,
        duration: 900.0,
        fps: 5.0,
        smile_rate: 3.0,
        effects: PlantedEffects {
            gaze_suppression: 0.2,
            ..Default::default()
        },
        ..small(11)
    });
    let r = gaze_blink_delta(&out.corpus, &out.ledger.smile_segments()).unwrap();
    let pos = r.get(Stratum::Positive);
    assert!((pos.gaze_delta.unwrap() + 0.2).abs() < 0.05, "{pos:?}");
    let neg = r.get(Stratum::Negative);
    assert!(neg.gaze_delta.unwrap().abs() < 0.05, "{neg:?}");
}

fn human_items(corpus: &Corpus, kind: ValenceType, gold: impl Fn(usize, Valence) -> Vec<Valence>) -> Vec<HumanValenceLabels> {
    let mut items = Vec::new();
    for v in &corpus.videos {
        for s in v.transcript.iter().filter(|s| s.speaker == Speaker::Subject) {
            let label = s.annotation.as_ref().unwrap().valence(kind);
            items.push(HumanValenceLabels {
                video_id: v.video_id.clone(),
                index: s.index,
                valence_type: kind,
                labels: gold(items.len(), label),
            });
        }
    }
    items
}

#[test]
fn alignment_perfect_when_labels_match_majority() {
    let out = synth(small(12));
    let items = human_items(&out.corpus, ValenceType::Narrative, |_, l| vec![l, l, Valence::Neutral]);
    let r = modality_alignment(&out.corpus, &items, 0.15).unwrap();
    let cell = r.cell(ValenceType::Narrative, ValenceSource::Transcript).unwrap();
    let s = cell.scores.as_ref().unwrap();
    assert_eq!(s.accuracy, 1.0);
    assert_eq!(s.macro_f1, 1.0);
    assert!(r.cell(ValenceType::Present, ValenceSource::Audio).unwrap().scores.is_none());
    assert!(r.to_csv().starts_with("# figure: modality-alignment\n"));
}

#[test]
fn alignment_constant_neutral_against_uniform_gold() {
    let out = synth(small(13));
    let mut corpus = out.corpus.clone();
    for v in &mut corpus.videos {
        for s in &mut v.transcript {
            s.annotation.as_mut().unwrap().present_valence = Valence::Neutral;
        }
    }
    let cycle = [Valence::Positive, Valence::Neutral, Valence::Negative];
    let mut items = human_items(&corpus, ValenceType::Present, |i, _| vec![cycle[i % 3]; 2]);
    items.truncate(items.len() / 3 * 3);
    let r = modality_alignment(&corpus, &items, 0.15).unwrap();
    let s = r.cell(ValenceType::Present, ValenceSource::Transcript).unwrap().scores.clone().unwrap();
    assert!((s.accuracy - 1.0 / 3.0).abs() < 1e-12);
    assert!((s.macro_f1 - 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn alignment_ties_and_missing_raters() {
    let out = synth(small(14));
    let mut items = human_items(&out.corpus, ValenceType::Narrative, |_, _| {
        vec![Valence::Positive, Valence::Neutral, Valence::Negative]
    });
    items.truncate(5);
    let r = modality_alignment(&out.corpus, &items, 0.15).unwrap();
    assert_eq!(r.ties[&ValenceType::Narrative], 5);
    items[0].labels.clear();
    assert!(matches!(
        modality_alignment(&out.corpus, &items, 0.15),
        Err(AnalysisError::NoMajorityPossible { .. })
    ));
}

#[test]
fn analyses_ignore_video_order() {
    let out = synth(SynthConfig {
        videos_per_subject: 2,
        ..small(15)
    });
    let smiles = out.ledger.smile_segments();
    let mut shuffled = out.corpus.clone();
    shuffled.videos.reverse();
    let run = |c: &Corpus| {
        (
            serde_json::to_string(&topic_smile_delta(c, &smiles, TopicOptions::default()).unwrap()).unwrap(),
            serde_json::to_string(&structure_syntax_rate_change(c, &smiles, Facet::Structure, OverlapRule::Any).unwrap())
                .unwrap(),
            serde_json::to_string(&valence_trajectories(c, &smiles, &TrajectoryOptions::new(ValenceType::Narrative)).unwrap())
                .unwrap(),
            serde_json::to_string(&gaze_blink_delta(c, &smiles).unwrap()).unwrap(),
        )
    };
    let (a, b) = (run(&out.corpus), run(&shuffled));
    assert_eq!(a, b);
}
