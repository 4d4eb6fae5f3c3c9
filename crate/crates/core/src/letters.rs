//! Bijective base-26 sentence identifiers: `A..Z, AA, AB, ..`.

/// Letter id for the zero-based position `index`.
pub fn letter_id(index: usize) -> String {
    let mut n = index + 1;
    let mut out = Vec::new();
    while n > 0 {
        let rem = (n - 1) % 26;
        out.push(b'A' + rem as u8);
        n = (n - 1) / 26;
    }
    out.reverse();
    String::from_utf8(out).expect("ASCII")
}

/// Zero-based position of a letter id, or `None` if it is not `[A-Z]+`.
pub fn index_of(id: &str) -> Option<usize> {
    if id.is_empty() {
        return None;
    }
    let mut n: usize = 0;
    for b in id.bytes() {
        if !b.is_ascii_uppercase() {
            return None;
        }
        n = n.checked_mul(26)?.checked_add((b - b'A') as usize + 1)?;
    }
    Some(n - 1)
}

pub fn is_letter_id(id: &str) -> bool {
    index_of(id).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_positions() {
        assert_eq!(letter_id(0), "A");
        assert_eq!(letter_id(25), "Z");
        assert_eq!(letter_id(26), "AA");
        assert_eq!(letter_id(27), "AB");
        assert_eq!(letter_id(51), "AZ");
        assert_eq!(letter_id(52), "BA");
        assert_eq!(letter_id(701), "ZZ");
        assert_eq!(letter_id(702), "AAA");
    }

    #[test]
    fn rejects_non_letters() {
        assert_eq!(index_of(""), None);
        assert_eq!(index_of("a"), None);
        assert_eq!(index_of("A1"), None);
    }

    proptest! {
        #[test]
        fn roundtrip(i in 0usize..1_000_000) {
            prop_assert_eq!(index_of(&letter_id(i)), Some(i));
        }

        #[test]
        fn order_matches_document_order(i in 0usize..100_000) {
            let (a, b) = (letter_id(i), letter_id(i + 1));
            prop_assert!((a.len(), &a) < (b.len(), &b));
        }
    }
}
