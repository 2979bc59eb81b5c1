//! Character-offset helpers. Offsets throughout the crate count Unicode
//! scalar values, not bytes.

/// Byte position of every char boundary, plus the end of the string.
pub(crate) fn char_boundaries(text: &str) -> Vec<usize> {
    let mut out: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
    out.push(text.len());
    out
}

/// Slices `text` by char offsets, returning `None` when out of range.
pub(crate) fn char_slice(text: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let mut it = text.char_indices().map(|(b, _)| b).chain(std::iter::once(text.len()));
    let b0 = it.nth(start)?;
    let b1 = if end == start { b0 } else { it.nth(end - start - 1)? };
    Some(&text[b0..b1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slices_by_scalar_values() {
        let s = "a–b é";
        assert_eq!(char_slice(s, 1, 3), Some("–b"));
        assert_eq!(char_slice(s, 4, 5), Some("é"));
        assert_eq!(char_slice(s, 5, 5), Some(""));
        assert_eq!(char_slice(s, 5, 6), None);
        assert_eq!(char_boundaries(s).len(), s.chars().count() + 1);
    }
}
