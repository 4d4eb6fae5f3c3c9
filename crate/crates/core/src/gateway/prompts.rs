use super::GatewayError;
use crate::letters;

/// Shared evidence-type guide for both extraction prompts.
pub const CATEGORY_GUIDE: &str = "Category guide:\n\
- QUOTE: a statement attributed to a named person or organization (e.g. \"The governor said the budget is balanced.\").\n\
- STATISTIC: a numeric fact from an official dataset or series (e.g. \"The unemployment rate was 3.9% in April 2024, per the BLS.\").\n\
- DOCUMENT: a finding from an authoritative record such as a law, court ruling, report or prior fact-check (e.g. \"A 2023 GAO report found the program lacked oversight.\").\n\
- CONTEXT: background, attribution or qualification needed to interpret other evidence (e.g. \"The bill had not yet passed the Senate at the time of the speech.\").\n\
- OTHER: evidence that fits none of the above.";

const EDITOR: &str = "You are a careful scientific editor.";

/// Renders `Claim: ...` / `Article (labeled): ...` exactly as both prompts
/// expect.
fn claim_and_article(claim: &str, labeled_article: &str) -> String {
    format!("Claim: {claim}\nArticle (labeled): {labeled_article}")
}

/// True when `letter` labels a line of the rendered article (`B: ...`).
pub fn article_has_letter(labeled_article: &str, letter: &str) -> bool {
    article_letters(labeled_article).any(|l| l == letter)
}

/// Letters labelling the lines of a rendered article, in order.
pub fn article_letters(labeled_article: &str) -> impl Iterator<Item = &str> {
    labeled_article.lines().filter_map(|line| {
        let (letter, _) = line.split_once(": ")?;
        letters::is_letter_id(letter).then_some(letter)
    })
}

/// Prompt pair asking for one decontextualized rewrite of the sentence at
/// `letter`.
pub fn build_decontextualize_prompt(
    claim: &str,
    labeled_article: &str,
    letter: &str,
    target_sentence: &str,
) -> Result<(String, String), GatewayError> {
    if !article_has_letter(labeled_article, letter) {
        return Err(GatewayError::UnknownLetter(letter.to_string()));
    }
    let system = format!(
        "{EDITOR} Produce ONE decontextualized sentence that stands alone, explicitly preserving or \
adding entities, numbers, dates that make the sentence clear even when read outside of the article. \
Preserve the original meaning and factual content; only add what is needed to read the sentence on its own. \
Assign a category label using exactly one of: QUOTE, STATISTIC, DOCUMENT, CONTEXT, OTHER.\n\
{CATEGORY_GUIDE}\n\
Respond with a JSON object with the fields \"letter\" (the target letter), \"decontextualized\" \
(the rewritten sentence) and \"category\". Return JSON only."
    );
    let user = format!(
        "{}\nTarget letter: {letter}\nTarget sentence: {target_sentence}\nReturn JSON only.",
        claim_and_article(claim, labeled_article)
    );
    Ok((system, user))
}

/// Prompt pair asking for `min_n`–`max_n` premises, each tied to exactly one
/// letter.
pub fn build_open_extract_prompt(
    claim: &str,
    labeled_article: &str,
    min_n: usize,
    max_n: usize,
) -> Result<(String, String), GatewayError> {
    if min_n < 1 || min_n > max_n {
        return Err(GatewayError::Bounds { min_n, max_n });
    }
    let system = format!(
        "{EDITOR} Extract {min_n}\u{2013}{max_n} non-redundant key premises from the labeled article. \
For each premise, provide: (a) exactly ONE letter anchor from the article that supports it; \
(b) ONE decontextualized sentence that stands alone; and (c) a category using exactly one of: \
QUOTE, STATISTIC, DOCUMENT, CONTEXT, OTHER.\n\
{CATEGORY_GUIDE}\n\
Respond with a JSON array of objects with the fields \"letter\", \"decontextualized\" and \
\"category\". Output JSON only."
    );
    let user = format!("{}\nReturn JSON only.", claim_and_article(claim, labeled_article));
    Ok((system, user))
}
