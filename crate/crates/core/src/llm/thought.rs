use super::LlmError;

pub const THOUGHT_MARKER: &str = "Here is my thought process:";
pub const RESPONSE_MARKER: &str = "Here is my response:";

/// Asks the model to reason first and put its payload after the response
/// marker. Refuses prompts that already contain a marker, which usually
/// means the prompt was wrapped twice.
pub fn wrap_thought(prompt: &str) -> Result<String, LlmError> {
    if prompt.contains(THOUGHT_MARKER) || prompt.contains(RESPONSE_MARKER) {
        return Err(LlmError::AlreadyWrapped);
    }
    let mut out = String::new();
    if !prompt.is_empty() {
        out.push_str(prompt);
        out.push_str("\n\n");
    }
    out.push_str(&format!(
        "Before answering, first write down your reasoning after the line \"{THOUGHT_MARKER}\". \
         Then give only the final answer after the line \"{RESPONSE_MARKER}\", with no markdown formatting."
    ));
    Ok(out)
}

/// Payload after the last response marker (or the whole text), trimmed,
/// with code-fence lines removed.
pub fn extract_answer(response: &str) -> String {
    let tail = match response.rfind(RESPONSE_MARKER) {
        Some(i) => &response[i + RESPONSE_MARKER.len()..],
        None => response,
    };
    strip_fences(tail.trim())
}

fn strip_fences(text: &str) -> String {
    if !text.lines().any(|l| l.trim_start().starts_with("```")) {
        return text.to_string();
    }
    text.lines()
        .filter(|l| !l.trim_start().starts_with("```"))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_contains_prompt_and_each_marker_once() {
        for p in ["Fix the dimensions of 0/p.", ""] {
            let w = wrap_thought(p).unwrap();
            assert!(w.contains(p));
            assert_eq!(w.matches(THOUGHT_MARKER).count(), 1);
            assert_eq!(w.matches(RESPONSE_MARKER).count(), 1);
        }
    }

    #[test]
    fn double_wrap_is_refused() {
        let w = wrap_thought("x").unwrap();
        assert!(matches!(wrap_thought(&w), Err(LlmError::AlreadyWrapped)));
    }

    #[test]
    fn extraction() {
        assert_eq!(
            extract_answer("Here is my thought process: blah Here is my response: FINAL"),
            "FINAL"
        );
        assert_eq!(extract_answer("  no markers here \n"), "no markers here");
        assert_eq!(
            extract_answer("Here is my response:\n```cpp\na 1;\n```\n"),
            "a 1;"
        );
        let r = format!("{THOUGHT_MARKER} t {RESPONSE_MARKER} one {RESPONSE_MARKER} two");
        assert_eq!(extract_answer(&r), "two");
    }
}
