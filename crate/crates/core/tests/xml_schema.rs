mod common;

use common::xml_cases::{cases, Expect};
use revkit_core::agents::{parse_agent_xml, AgentKind, REVIEW_SKELETON};

#[test]
fn populated_skeleton_parses_to_one_comment() {
    let xml = REVIEW_SKELETON
        .replace("<description></description>", "<description>D</description>")
        .replace("<file_path></file_path>", "<file_path>a.py</file_path>")
        .replace("<line_number></line_number>", "<line_number>3</line_number>")
        .replace("<confidence_score></confidence_score>", "<confidence_score>0.9</confidence_score>")
        .replace("<bucket></bucket>", "<bucket>error</bucket>");
    let parsed = parse_agent_xml(&format!("Here is my review:\n{xml}\nThanks."), AgentKind::Error).unwrap();
    assert!(parsed.warnings.is_empty(), "{:?}", parsed.warnings);
    let [c] = parsed.comments.as_slice() else {
        panic!("{:?}", parsed.comments)
    };
    assert_eq!(
        (
            c.description.as_str(),
            c.file_path.as_str(),
            c.line_number,
            c.confidence_score,
            c.bucket.as_str(),
            c.agent
        ),
        ("D", "a.py", 3, 0.9, "error", AgentKind::Error)
    );
    assert_eq!(c.corrective_code, None);
}

#[test]
fn twenty_malformed_variants_are_typed() {
    let all = cases();
    assert_eq!(all.len(), 20);
    for (name, text, expect) in all {
        let got = parse_agent_xml(&text, AgentKind::Security);
        match expect {
            Expect::Error(e) => assert_eq!(got, Err(e), "{name}"),
            Expect::Warning(w, n) => {
                let p = got.unwrap_or_else(|e| panic!("{name}: {e}"));
                assert!(p.warnings.contains(&w), "{name}: {:?}", p.warnings);
                assert_eq!(p.comments.len(), n, "{name}");
            }
        }
    }
}

#[test]
fn unescaped_code_and_cdata_survive() {
    let xml = "<review><comments><comment><description>Use &lt;= here</description>\
               <corrective_code><![CDATA[if a < b && c > d:\n    pass]]></corrective_code>\
               <file_path>./x.py</file_path><line_number> 7 </line_number>\
               <confidence_score>0.5</confidence_score><bucket>logic</bucket></comment></comments></review>";
    let p = parse_agent_xml(xml, AgentKind::Error).unwrap();
    assert!(p.warnings.is_empty(), "{:?}", p.warnings);
    let c = &p.comments[0];
    assert_eq!(c.description, "Use <= here");
    assert_eq!(c.corrective_code.as_deref(), Some("if a < b && c > d:\n    pass"));
    assert_eq!((c.file_path.as_str(), c.line_number), ("x.py", 7));
}

#[test]
fn truncated_prefixes_never_panic() {
    let (_, text, _) = cases().into_iter().find(|(n, _, _)| *n == "stray text between fields").unwrap();
    let text = format!("{text}ünïcødé <review>");
    for cut in 0..=text.len() {
        if text.is_char_boundary(cut) {
            let _ = parse_agent_xml(&text[..cut], AgentKind::Error);
        }
    }
}
