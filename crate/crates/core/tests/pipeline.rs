mod common;

use std::sync::OnceLock;

use seqlab_core::data::{LabelScheme, Task};
use seqlab_core::pipeline::{AnnotatedDocument, PipelineBundle};
use seqlab_core::{Error, Rng};

fn bundle() -> &'static PipelineBundle {
    static BUNDLE: OnceLock<PipelineBundle> = OnceLock::new();
    BUNDLE.get_or_init(common::toy_bundle)
}

fn assert_in_scheme(doc: &AnnotatedDocument) {
    let schemes: Vec<LabelScheme> = Task::ALL.iter().map(|&t| LabelScheme::for_task(t)).collect();
    for record in doc.sentences.iter().flatten() {
        assert!(schemes[0].contains(record.pos.as_deref().unwrap()));
        assert!(schemes[1].contains(record.chunk.as_deref().unwrap()));
        assert!(schemes[2].contains(record.ner.as_deref().unwrap()));
    }
}

#[test]
fn caption_sentence_is_fully_annotated() {
    let doc = bundle().annotate("Ông Nam là giảng_viên .").unwrap();
    assert_eq!(doc.sentences.len(), 1);
    let words: Vec<&str> = doc.sentences[0].iter().map(|r| r.word.as_str()).collect();
    assert_eq!(words, ["Ông", "Nam", "là", "giảng_viên", "."]);
    assert!(doc.sentences[0].iter().all(|r| r.is_complete()));
    assert_in_scheme(&doc);
    let json = doc.to_json().unwrap();
    assert!(json.contains("\"word\":\"giảng_viên\""));
}

#[test]
fn toy_sentences_get_their_labels() {
    let (train, _) = seqlab_core::train::make_toy_corpus(42);
    let (mut right, mut total) = (0, 0);
    for sentence in &train {
        let text = sentence.words().join(" ");
        let doc = bundle().annotate(&text).unwrap();
        assert_eq!(doc.sentences.len(), 1, "{text}");
        for (record, gold) in doc.sentences[0].iter().zip(&sentence.tokens) {
            for task in Task::ALL {
                let predicted = match task {
                    Task::Pos => &record.pos,
                    Task::Chunk => &record.chunk,
                    Task::Ner => &record.ner,
                };
                right += usize::from(predicted.as_deref() == gold.tag(task));
                total += 1;
            }
        }
    }
    assert!(right as f64 >= 0.9 * total as f64, "{right}/{total}");
}

#[test]
fn blank_input_gives_empty_document() {
    for text in ["", "   ", "\n\t"] {
        let doc = bundle().annotate(text).unwrap();
        assert!(doc.is_empty());
        assert_eq!(doc.to_json().unwrap(), r#"{"sentences":[]}"#);
    }
}

#[test]
fn annotation_is_deterministic_and_closed_over_schemes() {
    let mut rng = Rng::new(17);
    for _ in 0..30 {
        let n = 1 + rng.below(15);
        let text: Vec<String> = (0..n)
            .map(|_| {
                if rng.bernoulli(0.15) {
                    ".".to_string()
                } else {
                    common::random_word(&mut rng)
                }
            })
            .collect();
        let text = text.join(" ");
        let a = bundle().annotate(&text).unwrap();
        let b = bundle().annotate(&text).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_in_scheme(&a);
    }
}

#[test]
fn downstream_stages_read_predicted_tags() {
    let base = bundle();
    let text = "nha adep vla Tran Hung etai Dai_hoc Bach_Khoa .";
    let before = base.annotate(text).unwrap();

    // Force the POS model to call everything a verb.
    let mut pos = base.model(Task::Pos).clone();
    let bias = pos.params().find("projection.b").unwrap();
    let v = pos.scheme().index_of("V").unwrap();
    pos.params_mut().value_mut(bias).data_mut()[v] += 1e3;
    let perturbed = PipelineBundle::new(pos, base.model(Task::Chunk).clone(), base.model(Task::Ner).clone()).unwrap();
    let after = perturbed.annotate(text).unwrap();

    assert!(after.sentences[0].iter().all(|r| r.pos.as_deref() == Some("V")));
    let chunks = |d: &AnnotatedDocument| d.sentences[0].iter().map(|r| r.chunk.clone()).collect::<Vec<_>>();
    assert_ne!(chunks(&before), chunks(&after));
}

#[test]
fn bundle_directory_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    bundle().save(dir.path()).unwrap();
    let loaded = PipelineBundle::load(dir.path()).unwrap();
    let text = "Le Nam vdi ntruong . Dai_hoc Bach_Khoa vla nha moi !";
    assert_eq!(loaded.annotate(text).unwrap(), bundle().annotate(text).unwrap());
    assert_eq!(loaded.manifest(), bundle().manifest());
}

#[test]
fn swapped_model_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    bundle().save(dir.path()).unwrap();
    std::fs::copy(dir.path().join("pos.model"), dir.path().join("chunk.model")).unwrap();
    assert!(matches!(
        PipelineBundle::load(dir.path()),
        Err(Error::TaskMismatch {
            expected: Task::Chunk,
            found: Task::Pos
        })
    ));
    assert!(PipelineBundle::load(&dir.path().join("missing")).is_err());
}

#[test]
fn models_in_the_wrong_slot_are_rejected() {
    let b = bundle();
    let r = PipelineBundle::new(
        b.model(Task::Chunk).clone(),
        b.model(Task::Chunk).clone(),
        b.model(Task::Ner).clone(),
    );
    assert!(r.is_err());
}
