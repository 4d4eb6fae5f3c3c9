use ego_tree::NodeRef;
use scraper::{Html, Node};
use serde::{Deserialize, Serialize};

use super::IngestError;

/// Minimum block length, in characters, after whitespace collapsing. Shorter
/// blocks survive only when they end in sentence punctuation (`A.`).
pub const MIN_BLOCK_CHARS: usize = 3;

fn keep_block(text: &str) -> bool {
    text.chars().count() >= MIN_BLOCK_CHARS
        || (text.chars().count() > 1 && text.ends_with(['.', '!', '?']))
}

const BLOCK_TAGS: &[&str] = &["p", "li", "blockquote", "h1", "h2", "h3", "h4", "h5", "h6"];
const DROPPED_TAGS: &[&str] = &[
    "script", "style", "noscript", "template", "nav", "figcaption", "head", "svg", "iframe",
];

/// An inline hyperlink inside a block. `start..end` is a byte range into the
/// block text, always on char boundaries.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSpan {
    pub href: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBlock {
    pub text: String,
    pub links: Vec<LinkSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedDocument {
    pub article_url: String,
    pub blocks: Vec<TextBlock>,
}

impl NormalizedDocument {
    pub fn link_count(&self) -> usize {
        self.blocks.iter().map(|b| b.links.len()).sum()
    }
}

#[derive(Default)]
struct BlockBuilder {
    text: String,
    pending_space: bool,
    links: Vec<LinkSpan>,
    open_link: Option<(String, Option<usize>)>,
}

impl BlockBuilder {
    fn push_text(&mut self, s: &str) {
        for c in s.chars() {
            if c.is_whitespace() {
                if !self.text.is_empty() {
                    self.pending_space = true;
                }
                continue;
            }
            if self.pending_space {
                self.text.push(' ');
                self.pending_space = false;
            }
            if let Some((_, start @ None)) = &mut self.open_link {
                *start = Some(self.text.len());
            }
            self.text.push(c);
        }
    }

    fn soft_break(&mut self) {
        if !self.text.is_empty() {
            self.pending_space = true;
        }
    }

    fn open_link(&mut self, href: String) {
        self.close_link();
        self.open_link = Some((href, None));
    }

    fn close_link(&mut self) {
        if let Some((href, Some(start))) = self.open_link.take() {
            self.links.push(LinkSpan {
                href,
                start,
                end: self.text.len(),
            });
        }
    }

    fn finish(mut self) -> Option<TextBlock> {
        self.close_link();
        if !keep_block(&self.text) {
            return None;
        }
        Some(TextBlock {
            text: self.text,
            links: self.links,
        })
    }
}

struct Walker {
    blocks: Vec<TextBlock>,
    current: Option<BlockBuilder>,
}

impl Walker {
    fn flush(&mut self) {
        if let Some(b) = self.current.take() {
            self.blocks.extend(b.finish());
        }
    }

    fn walk(&mut self, node: NodeRef<'_, Node>) {
        match node.value() {
            Node::Text(t) => {
                if let Some(b) = self.current.as_mut() {
                    b.push_text(t);
                }
            }
            Node::Element(el) => {
                let name = el.name();
                if DROPPED_TAGS.contains(&name) {
                    return;
                }
                if BLOCK_TAGS.contains(&name) {
                    // Nested blocks (p inside li) split the outer one.
                    let outer = self.current.take();
                    if let Some(b) = outer {
                        self.blocks.extend(b.finish());
                    }
                    self.current = Some(BlockBuilder::default());
                    self.walk_children(node);
                    self.flush();
                    // Text after a nested block continues in a fresh block.
                    if node.ancestors().any(|a| {
                        a.value()
                            .as_element()
                            .is_some_and(|e| BLOCK_TAGS.contains(&e.name()))
                    }) {
                        self.current = Some(BlockBuilder::default());
                    }
                    return;
                }
                if name == "a" {
                    let href = el.attr("href").map(str::trim).filter(|h| !h.is_empty());
                    match (self.current.as_mut(), href) {
                        (Some(b), Some(href)) => {
                            b.open_link(href.to_string());
                            self.walk_children(node);
                            if let Some(b) = self.current.as_mut() {
                                b.close_link();
                            }
                        }
                        _ => self.walk_children(node),
                    }
                    return;
                }
                if name == "br" {
                    if let Some(b) = self.current.as_mut() {
                        b.soft_break();
                    }
                    return;
                }
                self.walk_children(node);
            }
            _ => self.walk_children(node),
        }
    }

    fn walk_children(&mut self, node: NodeRef<'_, Node>) {
        for child in node.children() {
            self.walk(child);
        }
    }
}

/// Converts article HTML into paragraph-level text blocks with inline link
/// spans.
///
/// Only `p`, `li`, `blockquote` and `h1`..`h6` produce blocks; text outside
/// them is ignored. Script, style, navigation and figure captions are
/// dropped. Whitespace collapses to single spaces and entities are decoded by
/// the parser.
pub fn normalize_html(article_url: &str, body_html: &str) -> Result<NormalizedDocument, IngestError> {
    let html = Html::parse_document(body_html);
    let mut walker = Walker {
        blocks: Vec::new(),
        current: None,
    };
    walker.walk(html.tree.root());
    walker.flush();
    if walker.blocks.is_empty() {
        return Err(IngestError::EmptyDocument(article_url.to_string()));
    }
    Ok(NormalizedDocument {
        article_url: article_url.to_string(),
        blocks: walker.blocks,
    })
}

/// Builds a document from pre-normalized text: one block per non-empty line.
pub fn normalize_text(article_url: &str, body_text: &str) -> Result<NormalizedDocument, IngestError> {
    let blocks: Vec<TextBlock> = body_text
        .lines()
        .filter_map(|line| {
            let mut b = BlockBuilder::default();
            b.push_text(line);
            b.finish()
        })
        .collect();
    if blocks.is_empty() {
        return Err(IngestError::EmptyDocument(article_url.to_string()));
    }
    Ok(NormalizedDocument {
        article_url: article_url.to_string(),
        blocks,
    })
}
