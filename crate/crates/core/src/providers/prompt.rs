use crate::error::{Error, Result};

/// A connection-analysis prompt for one dataset domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PromptTemplate {
    pub id: &'static str,
    /// Word used for the two endpoints, e.g. `Paper` gives `Paper A` / `Paper B`.
    pub entity: &'static str,
    pub instruction: &'static str,
    /// The first three response requirements; the fourth is always the
    /// sentence frame.
    pub requirements: [&'static str; 3],
}

const TEMPLATES: &[PromptTemplate] = &[
    PromptTemplate {
        id: "webpage",
        entity: "Webpage",
        instruction: "Analyze the hyperlink relationship between Webpage A and Webpage B of the computer science \
                      department of a university, based on their contents provided below.",
        requirements: [
            "Summarize the key content of both webpages and any notable features.",
            "Clearly explain the intellectual connection or relevance between the two webpages, highlighting how \
             they might be related.",
            "Keep the response concise (within 200 words) and emphasize the connection between the two webpages.",
        ],
    },
    PromptTemplate {
        id: "cs-citation",
        entity: "Paper",
        instruction: "Analyze the citation relationship between Paper A and Paper B in the field of computer \
                      science, based on their titles and abstracts provided below.",
        requirements: [
            "Summarize the key content of both papers, focusing on their research questions, methods, and \
             contributions.",
            "Clearly explain the intellectual connection or relevance between the two papers.",
            "Keep the response concise (within 200 words).",
        ],
    },
    PromptTemplate {
        id: "pubmed",
        entity: "Paper",
        instruction: "Analyze the citation relationship between Paper A and Paper B in the field of medical \
                      research on diabetes, based on their titles and abstracts provided below.",
        requirements: [
            "Summarize the key content of both papers.",
            "Clearly explain the intellectual connection or relevance between the two papers.",
            "Keep the response concise (within 200 words).",
        ],
    },
    PromptTemplate {
        id: "books",
        entity: "Book",
        instruction: "Analyze the co-purchased or co-viewed relationship between two History- or \
                      Children-related books on Amazon based on their titles and descriptions provided below.",
        requirements: [
            "Summarize the main points of both items.",
            "Clearly explain the relationship between the two books.",
            "Keep the response concise (within 200 words).",
        ],
    },
    PromptTemplate {
        id: "reviews",
        entity: "Item",
        instruction: "Analyze the co-purchased or co-viewed relationship between two Photo- or Computers-related \
                      items on Amazon based on their user reviews provided below.",
        requirements: [
            "Summarize the main points of both items' reviews.",
            "Clearly explain the relationship between the two items.",
            "Keep the response concise (within 200 words).",
        ],
    },
    PromptTemplate {
        id: "knowledge",
        entity: "Entry",
        instruction: "Analyze the hyperlink relationship between two Wikipedia entries based on their titles and \
                      contents provided below.",
        requirements: [
            "Summarize the main points of both entries.",
            "Clearly explain the relationship between the two entries.",
            "Keep the response concise (within 200 words).",
        ],
    },
    PromptTemplate {
        id: "anomaly",
        entity: "Toloker",
        instruction: "Analyze the co-work relationship between two tolokers (workers) based on their profile \
                      information and task performance statistics provided below.",
        requirements: [
            "Summarize the main points of both workers' profiles and performance.",
            "Clearly explain the relationship or relevance between the two workers.",
            "Keep the response concise (within 200 words) and emphasize the relationship between the two workers.",
        ],
    },
    PromptTemplate {
        id: "e-commerce",
        entity: "Item",
        instruction: "Analyze the relationship between two items sold on Amazon based on their item names. The \
                      items may include products such as books, music CDs, DVDs, or VHS tapes.",
        requirements: [
            "Describe and summarize the main characteristics of both items.",
            "Clearly explain the co-purchased or co-viewed relationship between the two items.",
            "Keep the response concise (within 200 words) and emphasize the relationship between the two items.",
        ],
    },
    PromptTemplate {
        id: "fitness",
        entity: "Item",
        instruction: "Analyze the co-purchased or co-viewed relationship between two fitness-related items sold on \
                      Amazon based on their item titles provided below.",
        requirements: [
            "Describe and summarize the main points of both items.",
            "Clearly explain the relationship or relevance between the two items.",
            "Keep the response concise (within 200 words) and emphasize the relationship between the two items.",
        ],
    },
    PromptTemplate {
        id: "products",
        entity: "Item",
        instruction: "Analyze the co-purchased relationship between two items sold on Amazon based on their \
                      product descriptions provided below.",
        requirements: [
            "Summarize the main points of both products' descriptions.",
            "Clearly explain the relationship or relevance between the two items.",
            "Keep the response concise (within 200 words) and emphasize the relationship between the two items.",
        ],
    },
    PromptTemplate {
        id: "generic",
        entity: "Node",
        instruction: "Analyze the relationship between Node A and Node B of a graph, based on their contents \
                      provided below.",
        requirements: [
            "Summarize the main points of both nodes.",
            "Clearly explain the relationship or relevance between the two nodes.",
            "Keep the response concise (within 200 words).",
        ],
    },
];

/// Substring every rendered prompt contains.
pub const FRAME_PREFIX: &str = "The relational implications between";

impl PromptTemplate {
    pub fn builtin() -> &'static [PromptTemplate] {
        TEMPLATES
    }

    pub fn by_id(id: &str) -> Result<&'static PromptTemplate> {
        TEMPLATES.iter().find(|t| t.id == id).ok_or_else(|| Error::UnknownTemplate(id.to_string()))
    }

    /// The sentence the model is asked to open its answer with.
    pub fn frame(&self) -> String {
        format!("{FRAME_PREFIX} [{e} A] and [{e} B] are as below.", e = self.entity)
    }

    pub fn render(&self, text_a: &str, text_b: &str) -> Result<String> {
        if text_a.trim().is_empty() || text_b.trim().is_empty() {
            return Err(Error::EmptyContent);
        }
        let [r1, r2, r3] = self.requirements;
        Ok(format!(
            "{instr}\n\nYour response should:\n1. {r1}\n2. {r2}\n3. {r3}\n4. Use the following sentence \
             structure: \"{frame}\"\n\n{e} A: {text_a}. {e} B: {text_b}.",
            instr = self.instruction,
            frame = self.frame(),
            e = self.entity,
        ))
    }
}

/// Renders the template registered under `id`.
pub fn render_prompt(id: &str, text_a: &str, text_b: &str) -> Result<String> {
    PromptTemplate::by_id(id)?.render(text_a, text_b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn citation_prompt_names_both_papers() {
        let p = render_prompt("cs-citation", "X", "Y").unwrap();
        assert!(p.contains("Paper A: X"));
        assert!(p.contains("Paper B: Y"));
        assert!(p.starts_with("Analyze the citation relationship between Paper A and Paper B"));
        assert!(p.contains("\n\nYour response should:\n1. "));
        assert!(p.contains("\"The relational implications between [Paper A] and [Paper B] are as below.\""));
    }

    #[test]
    fn generic_with_identical_texts() {
        let p = render_prompt("generic", "same", "same").unwrap();
        assert!(p.ends_with("Node A: same. Node B: same."));
    }

    #[test]
    fn every_builtin_carries_the_frame() {
        for t in PromptTemplate::builtin() {
            let p = t.render("a", "b").unwrap();
            assert!(p.contains(FRAME_PREFIX), "{}", t.id);
            assert!(!p.contains("  "), "double space in {}", t.id);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(render_prompt("nope", "a", "b"), Err(Error::UnknownTemplate(_))));
        assert!(matches!(render_prompt("generic", "", "b"), Err(Error::EmptyContent)));
        assert!(matches!(render_prompt("generic", "a", "  "), Err(Error::EmptyContent)));
    }
}
