//! Parsing imperfect in-line replies: the model rewrote part of the text,
//! invented a label and left a tag open. Annotations are still mapped back
//! to the original offsets, and every problem becomes a warning.

use iclner::domain::EntitySchema;
use iclner::parsing::{align_texts, parse_inline};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let schema = EntitySchema::new([("person", "A person"), ("location", "A place")])?;
    let original = "Yesterday,  Ana Torres flew from Lima to Cusco.";
    let reply = "Yesterday <person>Ana Torres</person> flew from <location>Lima</location> \
                 to <city>Cusco</city>. <person>";

    let (doc, report) = parse_inline(reply, original, &schema, None);
    for a in &doc.annotations {
        println!(
            "{:<9} {:>2}..{:<2} {:?}",
            a.label,
            a.start,
            a.end,
            doc.annotation_text(a)?
        );
    }
    for w in &report.warnings {
        println!("warning {:?}: {:?}", w.kind, w.fragment);
    }

    println!("\nalignment of the stripped reply against the original:");
    let map = align_texts("Yesterday Ana Torres flew from Lima to Cusco.", original);
    for region in map.regions() {
        println!(
            "  {:?} -> {:?} (quality {:.3})",
            region.stripped, region.original, region.quality
        );
    }
    Ok(())
}
