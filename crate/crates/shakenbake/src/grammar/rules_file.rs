//! Rule files: `rule id: mother -> d1 d2 ... head=j constraints=[...]`.
//! statements plus `goal name: pattern.` declarations, compiled into a
//! [`Grammar`]. AVM patterns use the canonical serialization of module
//! [`crate::avm`]; `#N` variables are shared across all patterns of one rule.

use super::{Constraint, Grammar, GrammarError, Rule, PRINCIPLE_NAMES};
use crate::avm::canon::Cursor;
use crate::avm::{Store, Template};

/// Compile a rule file. `file` labels error messages.
pub fn compile_rules(file: &str, text: &str) -> Result<Grammar, GrammarError> {
    let mut rules: Vec<Rule> = Vec::new();
    let mut goals: Vec<(String, Template)> = Vec::new();
    let mut check = Store::new();

    for (line, stmt) in super::statements(file, text)? {
        let err = |msg: String| GrammarError { file: file.into(), line, msg };
        let mut cur = Cursor::new(&stmt);
        let keyword = cur.ident().map_err(|e| super::located(file, line, &stmt, e))?;
        match keyword.as_str() {
            "rule" => {
                let rule = parse_rule(&mut cur, line)
                    .map_err(|e| super::located(file, line, &stmt, e))?;
                if rules.iter().any(|r| r.id == rule.id) {
                    return Err(err(format!("duplicate rule id '{}'", rule.id)));
                }
                if rule.head_position >= rule.daughters.len() {
                    return Err(err(format!(
                        "head={} is out of range for {} daughter(s)",
                        rule.head_position + 1,
                        rule.daughters.len()
                    )));
                }
                // Same cyclicity guard as lexical entries: every pattern must
                // self-unify without building a cyclic term.
                for pattern in rule.daughters.iter().chain([&rule.mother]) {
                    let mark = check.mark();
                    let a = check.instantiate_fresh(pattern);
                    let b = check.instantiate_fresh(pattern);
                    if check.unify_with_occurs_check(a, b).is_err() {
                        return Err(err(format!(
                            "a pattern of rule '{}' would create a cyclic structure",
                            rule.id
                        )));
                    }
                    check.undo_to(mark);
                }
                rules.push(rule);
            }
            "goal" => {
                let name = cur.ident().map_err(|e| super::located(file, line, &stmt, e))?;
                cur.expect(':').map_err(|e| super::located(file, line, &stmt, e))?;
                let pattern =
                    cur.parse_value().map_err(|e| super::located(file, line, &stmt, e))?;
                if !cur.at_end() {
                    return Err(err("unexpected text after goal pattern".into()));
                }
                if goals.iter().any(|(n, _)| *n == name) {
                    return Err(err(format!("duplicate goal '{name}'")));
                }
                goals.push((name, pattern));
            }
            other => {
                return Err(err(format!("expected 'rule' or 'goal', found '{other}'")));
            }
        }
    }

    if rules.is_empty() {
        return Err(GrammarError {
            file: file.into(),
            line: 1,
            msg: "rule file declares no rules".into(),
        });
    }
    let max_branching = rules.iter().map(|r| r.daughters.len()).max().unwrap();
    Ok(Grammar {
        rules,
        max_branching,
        principles: PRINCIPLE_NAMES,
        goals,
        label: file.into(),
    })
}

fn parse_rule(cur: &mut Cursor, line: usize) -> Result<Rule, crate::avm::canon::SyntaxError> {
    let id = cur.ident()?;
    cur.expect(':')?;
    let mother = cur.parse_value()?;
    cur.expect('-')?;
    cur.expect('>')?;

    let mut daughters = Vec::new();
    loop {
        cur.skip_ws();
        match cur.peek() {
            // Daughter patterns are AVM values; records in practice. A bare
            // identifier here would be ambiguous with the `head=` keyword.
            Some('{') | Some('[') | Some('#') => daughters.push(cur.parse_value()?),
            _ => break,
        }
    }
    if daughters.is_empty() {
        return Err(cur.err("a rule needs at least one daughter pattern"));
    }

    let kw = cur.ident()?;
    if kw != "head" {
        return Err(cur.err(format!("expected 'head=<j>', found '{kw}'")));
    }
    cur.expect('=')?;
    let head_1based = cur.number()?;
    if head_1based == 0 {
        return Err(cur.err("head position is 1-based; 0 is invalid"));
    }

    let kw = cur.ident()?;
    if kw != "constraints" {
        return Err(cur.err(format!("expected 'constraints=[...]', found '{kw}'")));
    }
    cur.expect('=')?;
    cur.expect('[')?;
    let mut constraints = Vec::new();
    if !cur.eat(']') {
        loop {
            let pos = cur.pos();
            let name = cur.ident()?;
            let Some(c) = Constraint::from_name(&name) else {
                return Err(crate::avm::canon::SyntaxError {
                    msg: format!(
                        "unknown constraint '{name}' (known: {})",
                        PRINCIPLE_NAMES.join(", ")
                    ),
                    offset: pos,
                });
            };
            constraints.push(c);
            if cur.eat(']') {
                break;
            }
            cur.expect(',')?;
        }
    }
    if !cur.at_end() {
        return Err(cur.err("unexpected text after constraint list"));
    }

    Ok(Rule {
        id,
        mother,
        daughters,
        head_position: (head_1based - 1) as usize,
        constraints,
        line,
    })
}
