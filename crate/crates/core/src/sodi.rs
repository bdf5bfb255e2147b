//! Structured object distribution instruction prompts.
//!
//! A prompt is the fixed scene head "A remote sensing image with " followed
//! by comma-separated "{count} {name}" items: counts descending, ties broken
//! by ascending class id, names pluralized with a trailing "s" when the count
//! is not 1 (names already ending in "s" stay unchanged). Classes absent from
//! the layout never appear. `parse` is the exact inverse on this grammar.

use serde::Serialize;

use crate::class::{ClassId, ClassTable};
use crate::error::{Error, Result};
use crate::layout::Layout;

pub const SCENE_HEAD: &str = "A remote sensing image with ";

/// One prompt item: a class and its nonzero object count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SodiCount {
    pub class_id: ClassId,
    pub class_name: String,
    pub count: u32,
}

/// A generated prompt with the counts it was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SodiPrompt {
    pub text: String,
    pub counts: Vec<SodiCount>,
}

fn pluralize(name: &str, count: u32) -> String {
    if count == 1 || name.ends_with('s') {
        name.to_string()
    } else {
        format!("{name}s")
    }
}

/// Render the prompt text for an ordered count list.
pub fn render_counts(counts: &[SodiCount]) -> String {
    let items: Vec<String> = counts
        .iter()
        .map(|c| format!("{} {}", c.count, pluralize(&c.class_name, c.count)))
        .collect();
    format!("{SCENE_HEAD}{}", items.join(", "))
}

/// Order counts canonically: descending count, then ascending class id.
pub fn order_counts(mut counts: Vec<SodiCount>) -> Vec<SodiCount> {
    counts.sort_by(|a, b| b.count.cmp(&a.count).then(a.class_id.cmp(&b.class_id)));
    counts
}

/// Build the prompt for a layout.
pub fn generate_sodi(layout: &Layout) -> Result<SodiPrompt> {
    if layout.objects.is_empty() {
        return Err(Error::EmptyLayout);
    }
    let mut by_class: std::collections::BTreeMap<ClassId, SodiCount> = Default::default();
    for obj in &layout.objects {
        by_class
            .entry(obj.class_id)
            .or_insert_with(|| SodiCount {
                class_id: obj.class_id,
                class_name: obj.class_name.clone(),
                count: 0,
            })
            .count += 1;
    }
    let counts = order_counts(by_class.into_values().collect());
    let text = render_counts(&counts);
    Ok(SodiPrompt { text, counts })
}

/// Parse a prompt back into its count list.
///
/// Rejects anything `render_counts` would not produce for some count list:
/// wrong scene head, malformed items, unknown or duplicate classes, wrong
/// plural form, or non-canonical ordering. Errors carry the byte offset of
/// the offending span.
pub fn parse_sodi(text: &str, class_table: &ClassTable) -> Result<Vec<SodiCount>> {
    let body = text.strip_prefix(SCENE_HEAD).ok_or_else(|| {
        let offset = text
            .bytes()
            .zip(SCENE_HEAD.bytes())
            .position(|(a, b)| a != b)
            .unwrap_or_else(|| text.len().min(SCENE_HEAD.len()));
        Error::SodiParse {
            offset,
            msg: format!("expected scene head {SCENE_HEAD:?}"),
        }
    })?;

    let mut counts = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut offset = SCENE_HEAD.len();
    for item in body.split(", ") {
        let (count_str, name_part) = item.split_once(' ').ok_or(Error::SodiParse {
            offset,
            msg: format!("item {item:?} is not \"<count> <name>\""),
        })?;
        let count: u32 = count_str.parse().map_err(|_| Error::SodiParse {
            offset,
            msg: format!("bad count {count_str:?}"),
        })?;
        if count == 0 {
            return Err(Error::SodiParse {
                offset,
                msg: "zero counts are filtered out of prompts".into(),
            });
        }
        let name_offset = offset + count_str.len() + 1;
        let class_id = resolve_name(name_part, count, class_table).ok_or_else(|| {
            Error::SodiParse {
                offset: name_offset,
                msg: format!("unknown class {name_part:?}"),
            }
        })?;
        let class_name = class_table.name_of(class_id).unwrap().to_string();
        if pluralize(&class_name, count) != name_part {
            return Err(Error::SodiParse {
                offset: name_offset,
                msg: format!(
                    "{name_part:?} is not the correct form of {class_name:?} for count {count}"
                ),
            });
        }
        if !seen.insert(class_id) {
            return Err(Error::SodiParse {
                offset: name_offset,
                msg: format!("class {class_name:?} appears twice"),
            });
        }
        counts.push(SodiCount {
            class_id,
            class_name,
            count,
        });
        offset += item.len() + 2;
    }
    if counts.is_empty() {
        return Err(Error::SodiParse {
            offset: SCENE_HEAD.len(),
            msg: "prompt lists no objects".into(),
        });
    }
    if order_counts(counts.clone()) != counts {
        return Err(Error::SodiParse {
            offset: SCENE_HEAD.len(),
            msg: "items are not in canonical order (count desc, then class id)".into(),
        });
    }
    Ok(counts)
}

fn resolve_name(name_part: &str, count: u32, table: &ClassTable) -> Option<ClassId> {
    if let Some(id) = table.id_of(name_part) {
        return Some(id);
    }
    if count != 1 {
        if let Some(stem) = name_part.strip_suffix('s') {
            return table.id_of(stem);
        }
    }
    None
}
