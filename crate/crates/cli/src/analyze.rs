use std::path::PathBuf;

use smilescope_core::analysis::{
    gaze_blink_delta, modality_alignment, smile_rate_timeline, structure_syntax_rate_change,
    topic_smile_delta, valence_trajectories, HumanValenceLabels, SmileIndex, TopicOptions,
    TrajectoryOptions,
};
use smilescope_core::narrative::{attach_annotations, load_annotation_rows};
use smilescope_core::SmileSegment;

use crate::error::CliError;
use crate::pipeline::{load_corpus, read_jsonl};
use crate::record::Run;
use crate::Study;

fn smile_index(run: &mut Run, path: Option<PathBuf>) -> Result<SmileIndex, CliError> {
    let path = path.ok_or_else(|| CliError::Usage("--smiles is required for this study".into()))?;
    run.input(&path)?;
    let rows: Vec<SmileSegment> = read_jsonl(&path)?;
    let mut index = SmileIndex::new();
    for s in rows {
        index.entry(s.video_id.clone()).or_default().push(s);
    }
    for v in index.values_mut() {
        v.sort_by(|a, b| a.start.total_cmp(&b.start));
    }
    Ok(index)
}

pub fn analyze(
    run: &mut Run,
    study: Study,
    smiles: Option<PathBuf>,
    annotations: Option<PathBuf>,
    human: Option<PathBuf>,
) -> Result<(), CliError> {
    let mut corpus = load_corpus(run)?;
    if let Some(p) = annotations {
        run.input(&p)?;
        let rows = load_annotation_rows(&p)?;
        attach_annotations(&mut corpus, &rows);
    }
    let ac = run.config.analysis.clone();
    match study {
        Study::Timeline => {
            let idx = smile_index(run, smiles)?;
            let r = smile_rate_timeline(&corpus, &idx, ac.timeline_bins)?;
            run.report("timeline.json", &r)?;
            run.figure("timeline.csv", &r)?;
        }
        Study::Topics => {
            let idx = smile_index(run, smiles)?;
            let opts = TopicOptions {
                window: ac.topic_window,
                strict_onset: ac.strict_onset,
            };
            let r = topic_smile_delta(&corpus, &idx, opts)?;
            run.report("topics.json", &r)?;
            run.figure("topics.csv", &r)?;
        }
        Study::Rates => {
            let idx = smile_index(run, smiles)?;
            let mut reports = Vec::new();
            for facet in &ac.facets {
                let r = structure_syntax_rate_change(&corpus, &idx, *facet, ac.overlap)?;
                let name = match facet {
                    smilescope_core::analysis::Facet::Structure => "rates-structure.csv",
                    smilescope_core::analysis::Facet::Syntax => "rates-syntax.csv",
                };
                run.figure(name, &r)?;
                reports.push(r);
            }
            run.report("rates.json", &reports)?;
        }
        Study::Trajectories => {
            let idx = smile_index(run, smiles)?;
            let mut reports = Vec::new();
            for vt in &ac.valence_types {
                let opts = TrajectoryOptions {
                    valence_type: *vt,
                    modalities: ac.modalities.clone(),
                    band: ac.band,
                };
                let r = valence_trajectories(&corpus, &idx, &opts)?;
                let name = match vt {
                    smilescope_core::narrative::ValenceType::Narrative => "trajectories-narrative.csv",
                    smilescope_core::narrative::ValenceType::Present => "trajectories-present.csv",
                };
                run.figure(name, &r)?;
                reports.push(r);
            }
            run.report("trajectories.json", &reports)?;
        }
        Study::GazeBlink => {
            let idx = smile_index(run, smiles)?;
            let r = gaze_blink_delta(&corpus, &idx)?;
            run.report("gaze-blink.json", &r)?;
            run.figure("gaze-blink.csv", &r)?;
        }
        Study::Alignment => {
            let path = human.ok_or_else(|| CliError::Usage("--human is required for alignment".into()))?;
            run.input(&path)?;
            let labels: Vec<HumanValenceLabels> = read_jsonl(&path)?;
            let r = modality_alignment(&corpus, &labels, ac.band)?;
            run.report("alignment.json", &r)?;
            run.figure("alignment.csv", &r)?;
        }
    }
    Ok(())
}
