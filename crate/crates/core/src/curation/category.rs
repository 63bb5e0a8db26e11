//! Keyword-table categorization and frequency-based tagging.

use serde::Deserialize;

use crate::skill::{Category, SkillPackage, Tag};
use crate::text::{is_stopword, tokenize};

/// The bundled keyword table.
pub const CATEGORY_TABLE_JSON: &str = include_str!("../../data/category_keywords.json");

pub const FALLBACK_TAG_COUNT: usize = 5;

#[derive(Debug, Deserialize)]
struct RawRow {
    category: Category,
    keywords: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct RawTable {
    version: String,
    rows: Vec<RawRow>,
}

/// Ordered keyword rows. The first row with a keyword phrase occurring in
/// the text decides the category. Phrases match whole tokens.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoryTable {
    pub version: String,
    rows: Vec<(Category, Vec<Vec<String>>)>,
}

impl Default for CategoryTable {
    fn default() -> Self {
        CategoryTable::from_json(CATEGORY_TABLE_JSON).expect("bundled category table is valid")
    }
}

impl CategoryTable {
    pub fn from_json(json: &str) -> Result<Self, serde_json::Error> {
        let raw: RawTable = serde_json::from_str(json)?;
        Ok(CategoryTable {
            version: raw.version,
            rows: raw
                .rows
                .into_iter()
                .map(|row| {
                    let phrases = row
                        .keywords
                        .iter()
                        .map(|k| tokenize(k))
                        .filter(|p| !p.is_empty())
                        .collect();
                    (row.category, phrases)
                })
                .collect(),
        })
    }

    pub fn lookup(&self, text: &str) -> Category {
        let tokens = tokenize(text);
        self.rows
            .iter()
            .find(|(_, phrases)| {
                phrases
                    .iter()
                    .any(|p| tokens.windows(p.len()).any(|w| w == p.as_slice()))
            })
            .map_or(Category::Other, |(category, _)| *category)
    }
}

/// Up to `FALLBACK_TAG_COUNT` most frequent non-stopword tokens that are
/// valid tags, ties going to the earlier first occurrence.
pub fn frequency_tags(text: &str) -> Vec<Tag> {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for token in tokenize(text) {
        if is_stopword(&token) {
            continue;
        }
        match counts.iter_mut().find(|(t, _)| *t == token) {
            Some((_, n)) => *n += 1,
            None => counts.push((token, 1)),
        }
    }
    // Stable sort keeps first-occurrence order among equal counts.
    counts.sort_by_key(|c| std::cmp::Reverse(c.1));
    counts
        .into_iter()
        .filter_map(|(t, _)| Tag::new(t).ok())
        .take(FALLBACK_TAG_COUNT)
        .collect()
}

/// Offline categorization from name and description.
pub fn categorize_fallback(table: &CategoryTable, pkg: &SkillPackage) -> (Category, Vec<Tag>) {
    let meta = &pkg.document.metadata;
    let text = format!("{} {}", meta.name, meta.description);
    let category = table.lookup(&text);
    let mut tags = frequency_tags(&text);
    if tags.is_empty() {
        tags.push(Tag::new(category.as_str().to_lowercase()).expect("category names are slugs"));
    }
    (category, tags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_loads() {
        let table = CategoryTable::default();
        assert_eq!(table.version, "category-keywords/1");
        assert!(!table.rows.iter().any(|(c, _)| *c == Category::Other));
    }

    #[test]
    fn lookup_examples() {
        let table = CategoryTable::default();
        assert_eq!(table.lookup("helpers for unit testing"), Category::Testing);
        assert_eq!(table.lookup("zzz qqq"), Category::Other);
        // "github" must not match the phrase "git" partially, and vice versa.
        assert_eq!(table.lookup("gitlike things"), Category::Other);
    }

    #[test]
    fn table_order_decides() {
        let json = r#"{"version":"t","rows":[
            {"category":"Security","keywords":["scan"]},
            {"category":"Testing","keywords":["scan"]}]}"#;
        assert_eq!(CategoryTable::from_json(json).unwrap().lookup("scan ports"), Category::Security);
    }

    #[test]
    fn tags_by_frequency() {
        let tags = frequency_tags("plot charts with a plotting library for data analysis");
        let names: Vec<&str> = tags.iter().map(Tag::as_str).collect();
        assert_eq!(names, vec!["plot", "charts", "plotting", "library", "data"]);
        let tags = frequency_tags("pdf merge pdf split pdf");
        assert_eq!(tags[0].as_str(), "pdf");
        assert_eq!(tags.len(), 3);
    }
}
