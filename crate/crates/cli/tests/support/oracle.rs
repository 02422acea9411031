//! Tree-sitter-free recount of packages, functions and comments. A
//! character scanner blanks out comments and string literals, then
//! per-language line patterns count the constructs. Fixture files follow
//! one-signature-per-line formatting so the patterns stay simple.

use std::sync::LazyLock;

use regex::Regex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Counts {
    pub packages: usize,
    pub functions: usize,
    pub comments: usize,
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.packages += o.packages;
        self.functions += o.functions;
        self.comments += o.comments;
    }
}

#[derive(Clone, Copy)]
struct Syntax {
    char_literals: bool,
    backtick_strings: bool,
}

/// Source with comments replaced by spaces and string bodies removed,
/// plus the number of comments seen.
fn scan(src: &str, syn: Syntax) -> (String, usize) {
    let b: Vec<char> = src.chars().collect();
    let mut out = String::with_capacity(src.len());
    let mut comments = 0;
    let mut i = 0;
    while i < b.len() {
        let c = b[i];
        let next = b.get(i + 1).copied();
        if c == '/' && next == Some('/') {
            comments += 1;
            while i < b.len() && b[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && next == Some('*') {
            comments += 1;
            i += 2;
            while i < b.len() && !(b[i] == '*' && b.get(i + 1) == Some(&'/')) {
                if b[i] == '\n' {
                    out.push('\n');
                }
                i += 1;
            }
            i += 2;
            out.push(' ');
        } else if c == '"' || (c == '\'' && syn.char_literals) || (c == '`' && syn.backtick_strings) {
            out.push(c);
            i += 1;
            while i < b.len() && b[i] != c {
                if b[i] == '\\' {
                    i += 1;
                } else if b[i] == '\n' {
                    out.push('\n');
                }
                i += 1;
            }
            out.push(c);
            i += 1;
        } else {
            out.push(c);
            i += 1;
        }
    }
    (out, comments)
}

const KEYWORDS: [&str; 9] = ["if", "for", "while", "switch", "catch", "return", "sizeof", "function", "else"];

fn count_lines(code: &str, re: &Regex, name_group: Option<usize>) -> usize {
    code.lines()
        .filter_map(|l| re.captures(l))
        .filter(|c| name_group.map_or(true, |g| c.get(g).is_some_and(|m| !KEYWORDS.contains(&m.as_str()))))
        .count()
}

static CPP_INCLUDE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"^\s*#\s*include\s*[<"]"#).unwrap());
static CPP_FUNCTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*(?:(?:static|inline|explicit|virtual|constexpr|const)\s+)*(?:[\w:<>,*&]+\s+)?(~?[A-Za-z_][\w:~]*)\s*\([^;{]*\)\s*(?:const\s*)?(?:noexcept\s*)?(?:override\s*)?(?::[^;{]*)?\{",
    )
    .unwrap()
});

pub fn cpp(src: &str) -> Counts {
    // includes are matched on the raw text since their paths look like strings
    let (code, comments) = scan(src, Syntax { char_literals: true, backtick_strings: false });
    Counts {
        packages: src.lines().filter(|l| CPP_INCLUDE.is_match(l)).count(),
        functions: count_lines(&code, &CPP_FUNCTION, Some(1)),
        comments,
    }
}

static TS_IMPORT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"^\s*import\s*[\w{*"']"#).unwrap());
static TS_FUNCTION: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:export\s+)?(?:default\s+)?(?:async\s+)?function\s*\*?\s*[A-Za-z_$]").unwrap()
});
static TS_METHOD: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"^\s*(?:(?:public|private|protected|static|async|override|readonly|get|set)\s+)*\*?\s*([A-Za-z_$#][\w$]*)\s*(?:<[^>]*>)?\s*\([^)]*\)\s*(?::\s*[^{=;]+)?\{\s*$",
    )
    .unwrap()
});

pub fn typescript(src: &str) -> Counts {
    let (code, comments) = scan(src, Syntax { char_literals: true, backtick_strings: true });
    Counts {
        packages: code.lines().filter(|l| TS_IMPORT.is_match(l)).count(),
        functions: count_lines(&code, &TS_FUNCTION, None) + count_lines(&code, &TS_METHOD, Some(1)),
        comments,
    }
}

static SCALA_IMPORT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*import\s+\w").unwrap());
static SCALA_DEF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bdef\s+[^\s(\[:=]").unwrap());

pub fn scala(src: &str) -> Counts {
    let (code, comments) = scan(src, Syntax { char_literals: false, backtick_strings: false });
    Counts {
        packages: code.lines().filter(|l| SCALA_IMPORT.is_match(l)).count(),
        functions: code.lines().map(|l| SCALA_DEF.find_iter(l).count()).sum(),
        comments,
    }
}

static CPP_INCLUDE_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?m)^\s*#\s*include\s*[<"]([^>"]+)[>"]"#).unwrap());
static TS_IMPORT_NAME: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?m)^\s*import\b[^;]*?["']([^"']+)["']"#).unwrap());
static SCALA_IMPORT_NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\s*import\s+([^\s{,]+)").unwrap());

/// Imported package names in source order.
pub fn package_names(language: &str, src: &str) -> Vec<String> {
    let (re, text) = match language {
        "cpp" => (&*CPP_INCLUDE_NAME, src.to_string()),
        "typescript" => (&*TS_IMPORT_NAME, src.to_string()),
        "scala" => (&*SCALA_IMPORT_NAME, scan(src, Syntax { char_literals: false, backtick_strings: false }).0),
        other => panic!("no oracle for {other}"),
    };
    re.captures_iter(&text)
        .map(|c| c[1].trim_end_matches("._").trim_end_matches('.').to_string())
        .collect()
}

pub fn count(language: &str, src: &str) -> Counts {
    match language {
        "cpp" => cpp(src),
        "typescript" => typescript(src),
        "scala" => scala(src),
        other => panic!("no oracle for {other}"),
    }
}

#[cfg(test)]
mod tests {
    #[test]
    fn scanner_skips_strings() {
        let (code, n) = super::scan("a = \"// no\"; // yes\n/* b */ c", super::Syntax { char_literals: true, backtick_strings: false });
        assert_eq!(n, 2);
        assert!(!code.contains("no") && code.contains('c'));
    }
}
