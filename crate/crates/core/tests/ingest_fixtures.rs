use std::path::PathBuf;

use evidence_core::ingest::{ingest_article, normalize_html, IngestConfig};
use evidence_core::model::parse_articles;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn article_01_blocks_and_spans() {
    let doc = normalize_html("u", &fixture("article_01.html")).unwrap();
    assert_eq!(doc.blocks.len(), 14);
    assert_eq!(doc.link_count(), 6);
    assert_eq!(doc.blocks[0].text, "Did the state add 50,000 jobs last year?");
    assert_eq!(doc.blocks[1].text, "Gov. Jane Smith said on Jan. 5 that the state \u{201c}added 50,000 jobs\u{201d} in 2023.");
    assert_eq!(doc.blocks[5].text, "That is about 62% of the figure Smith cited.");
    let speech = &doc.blocks[2];
    let span = &speech.links[0];
    assert_eq!(&speech.text[span.start..span.end], "campaign speech");
    assert!(doc.blocks.iter().all(|b| !b.text.contains("Home") && !b.text.contains("Chart")));
}

#[test]
fn corpus_units_letters_and_anchors() {
    let (records, errors) = parse_articles(&fixture("articles.jsonl"));
    assert!(errors.is_empty(), "{errors:?}");
    let cfg = IngestConfig::default();
    let out: Vec<_> = records.iter().map(|r| ingest_article(r, &cfg).unwrap()).collect();

    let units: Vec<usize> = out.iter().map(|a| a.units.len()).collect();
    assert_eq!(units, [19, 27, 6]);
    let verdict: Vec<Vec<&str>> = out
        .iter()
        .map(|a| {
            a.units
                .iter()
                .filter(|u| u.is_verdict_sentence)
                .map(|u| u.letter_id.as_str())
                .collect()
        })
        .collect();
    assert_eq!(verdict, [vec!["S"], vec!["AA"], vec!["F"]]);

    let anchored: Vec<Vec<&str>> = out
        .iter()
        .map(|a| a.anchors.iter().map(|x| x.letter_id.as_str()).collect())
        .collect();
    assert_eq!(anchored, [vec!["C", "F", "H", "Q"], vec!["C"], vec![]]);
    let links: usize = out.iter().flat_map(|a| &a.units).map(|u| u.hyperlink_urls.len()).sum();
    assert_eq!(links, 7);

    let a1 = &out[0].units;
    assert_eq!(a1[2].text, "The claim appeared in a campaign speech in Springfield.");
    assert_eq!(a1[3].text, "Smith repeated it in a press release.");
    assert_eq!(a1[10].letter_id, "K");
    assert_eq!(a1[10].text, "Economists were skeptical.");
    assert_eq!(
        a1[11].text,
        "Dr. Alan Reyes of Springfield University said seasonal jobs \"inflate the headline number.\""
    );
    let last = out[1].units.last().unwrap();
    assert_eq!((last.letter_id.as_str(), last.text.as_str()), ("AA", "We rate this statement True."));
    assert_eq!(out[1].anchors[0].matched_source.name, "State DOT bridge inventory, 2023");
    assert!(!out[2].has_anchors());
}
