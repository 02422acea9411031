//! Statically linked tree-sitter grammars for the registered languages.

use tree_sitter::Language;

/// Grammar for `language`, or `None` when no backend is linked for it.
pub fn grammar(language: &str) -> Option<Language> {
    let lang: Language = match language {
        "agda" => tree_sitter_agda::LANGUAGE.into(),
        "c" => tree_sitter_c::LANGUAGE.into(),
        "cpp" => tree_sitter_cpp::LANGUAGE.into(),
        "csharp" => tree_sitter_c_sharp::LANGUAGE.into(),
        "d" => tree_sitter_d::LANGUAGE.into(),
        "dart" => tree_sitter_dart::LANGUAGE.into(),
        "elm" => tree_sitter_elm::LANGUAGE.into(),
        "go" => tree_sitter_go::LANGUAGE.into(),
        "haskell" => tree_sitter_haskell::LANGUAGE.into(),
        "java" => tree_sitter_java::LANGUAGE.into(),
        "javascript" => tree_sitter_javascript::LANGUAGE.into(),
        "kotlin" => tree_sitter_kotlin_ng::LANGUAGE.into(),
        "nim" => tree_sitter_nim::LANGUAGE.into(),
        "objective_c" => tree_sitter_objc::LANGUAGE.into(),
        "ocaml" => tree_sitter_ocaml::LANGUAGE_OCAML.into(),
        "perl" => tree_sitter_perl::LANGUAGE.into(),
        "python" => tree_sitter_python::LANGUAGE.into(),
        "qml" => tree_sitter_qmljs::LANGUAGE.into(),
        "rust" => tree_sitter_rust::LANGUAGE.into(),
        "scala" => tree_sitter_scala::LANGUAGE.into(),
        "typescript" => tree_sitter_typescript::LANGUAGE_TYPESCRIPT.into(),
        _ => return None,
    };
    Some(lang)
}
