use super::ast::{Attr, CmpOp, Expr, ListOperand, Literal, Operand};
use super::catalog::{AttrType, CatalogSchema};
use super::IqlError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Arg<T> {
    Col(usize),
    Lit(T),
}

/// A leaf predicate with attributes resolved to columns. Comparisons always
/// have a column on the left.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Pred {
    Num {
        lhs: usize,
        op: CmpOp,
        rhs: Arg<f64>,
    },
    Str {
        lhs: usize,
        op: CmpOp,
        rhs: Arg<String>,
    },
    Bool {
        lhs: usize,
        op: CmpOp,
        rhs: Arg<bool>,
    },
    BoolAttr(usize),
    InNums {
        col: usize,
        values: Vec<f64>,
    },
    InStrs {
        col: usize,
        values: Vec<String>,
    },
    InBools {
        col: usize,
        values: Vec<bool>,
    },
    Substr {
        hay: Arg<String>,
        needle: Arg<String>,
    },
    ListHas {
        list: usize,
        needle: Arg<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum TypedExpr {
    And(Box<TypedExpr>, Box<TypedExpr>),
    Or(Box<TypedExpr>, Box<TypedExpr>),
    Not(Box<TypedExpr>),
    Leaf(Pred),
}

/// A query checked against a schema, ready to run on catalogs with that schema.
#[derive(Debug, Clone, PartialEq)]
pub struct TypedQuery {
    pub(crate) expr: TypedExpr,
    pub(crate) schema: CatalogSchema,
    source: Expr,
}

impl TypedQuery {
    pub fn schema(&self) -> &CatalogSchema {
        &self.schema
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }
}

pub fn typecheck(ast: &Expr, schema: &CatalogSchema) -> Result<TypedQuery, IqlError> {
    Ok(TypedQuery {
        expr: check(ast, schema)?,
        schema: schema.clone(),
        source: ast.clone(),
    })
}

/// Parses and typechecks in one step.
pub fn compile(query: &str, schema: &CatalogSchema) -> Result<TypedQuery, IqlError> {
    typecheck(&super::parse(query)?, schema)
}

fn resolve(a: &Attr, schema: &CatalogSchema) -> Result<(usize, AttrType), IqlError> {
    schema
        .lookup(&a.name)
        .ok_or_else(|| IqlError::UnknownAttribute {
            name: a.name.clone(),
            offset: a.offset,
        })
}

fn literal_type(l: &Literal) -> AttrType {
    match l {
        Literal::Number(_) => AttrType::Numeric,
        Literal::Str(_) => AttrType::String,
        Literal::Bool(_) => AttrType::Boolean,
    }
}

fn operand_type(o: &Operand, schema: &CatalogSchema) -> Result<AttrType, IqlError> {
    match o {
        Operand::Attr(a) => Ok(resolve(a, schema)?.1),
        Operand::Lit(l) => Ok(literal_type(l)),
    }
}

fn type_error(node: &Expr, message: impl Into<String>) -> IqlError {
    IqlError::Type {
        node: node.to_string(),
        message: message.into(),
    }
}

fn col(o: &Operand, schema: &CatalogSchema) -> Option<usize> {
    match o {
        Operand::Attr(a) => schema.lookup(&a.name).map(|(i, _)| i),
        Operand::Lit(_) => None,
    }
}

fn str_arg(o: &Operand, schema: &CatalogSchema) -> Arg<String> {
    match o {
        Operand::Lit(Literal::Str(s)) => Arg::Lit(s.clone()),
        other => Arg::Col(col(other, schema).expect("checked string operand")),
    }
}

fn check(e: &Expr, schema: &CatalogSchema) -> Result<TypedExpr, IqlError> {
    Ok(match e {
        Expr::And(a, b) => TypedExpr::And(Box::new(check(a, schema)?), Box::new(check(b, schema)?)),
        Expr::Or(a, b) => TypedExpr::Or(Box::new(check(a, schema)?), Box::new(check(b, schema)?)),
        Expr::Not(a) => TypedExpr::Not(Box::new(check(a, schema)?)),
        Expr::Attr(a) => match resolve(a, schema)? {
            (i, AttrType::Boolean) => TypedExpr::Leaf(Pred::BoolAttr(i)),
            (_, t) => {
                return Err(type_error(
                    e,
                    format!("`{}` is {t}, only boolean attributes stand alone", a.name),
                ))
            }
        },
        Expr::Compare { op, lhs, rhs } => {
            let (lt, rt) = (operand_type(lhs, schema)?, operand_type(rhs, schema)?);
            if lt != rt {
                return Err(type_error(e, format!("cannot compare {lt} with {rt}")));
            }
            if op.is_ordering() && lt != AttrType::Numeric {
                return Err(type_error(
                    e,
                    format!("`{op}` needs numeric operands, found {lt}"),
                ));
            }
            let (lhs, op, rhs) = if lhs.is_attr() {
                (lhs, *op, rhs)
            } else {
                (rhs, op.flipped(), lhs)
            };
            let l = col(lhs, schema).expect("attribute operand");
            let pred = match (lt, rhs) {
                (AttrType::Numeric, Operand::Lit(Literal::Number(v))) => Pred::Num {
                    lhs: l,
                    op,
                    rhs: Arg::Lit(*v),
                },
                (AttrType::String, Operand::Lit(Literal::Str(s))) => Pred::Str {
                    lhs: l,
                    op,
                    rhs: Arg::Lit(s.clone()),
                },
                (AttrType::Boolean, Operand::Lit(Literal::Bool(b))) => Pred::Bool {
                    lhs: l,
                    op,
                    rhs: Arg::Lit(*b),
                },
                (AttrType::StringList, _) => {
                    return Err(type_error(
                        e,
                        "string lists only support `in` and `contains`",
                    ))
                }
                (t, r) => {
                    let r = col(r, schema).expect("attribute operand");
                    match t {
                        AttrType::Numeric => Pred::Num {
                            lhs: l,
                            op,
                            rhs: Arg::Col(r),
                        },
                        AttrType::String => Pred::Str {
                            lhs: l,
                            op,
                            rhs: Arg::Col(r),
                        },
                        _ => Pred::Bool {
                            lhs: l,
                            op,
                            rhs: Arg::Col(r),
                        },
                    }
                }
            };
            TypedExpr::Leaf(pred)
        }
        Expr::In {
            lhs,
            rhs: ListOperand::List(items),
        } => {
            let lt = operand_type(lhs, schema)?;
            let c = col(lhs, schema).expect("list membership has an attribute on the left");
            if let Some(bad) = items.iter().find(|l| literal_type(l) != lt) {
                return Err(type_error(
                    e,
                    format!("list element {bad} does not match {lt}"),
                ));
            }
            let pred = match lt {
                AttrType::Numeric => Pred::InNums {
                    col: c,
                    values: items
                        .iter()
                        .filter_map(|l| {
                            if let Literal::Number(v) = l {
                                Some(*v)
                            } else {
                                None
                            }
                        })
                        .collect(),
                },
                AttrType::String => Pred::InStrs {
                    col: c,
                    values: items
                        .iter()
                        .filter_map(|l| {
                            if let Literal::Str(s) = l {
                                Some(s.clone())
                            } else {
                                None
                            }
                        })
                        .collect(),
                },
                AttrType::Boolean => Pred::InBools {
                    col: c,
                    values: items
                        .iter()
                        .filter_map(|l| {
                            if let Literal::Bool(b) = l {
                                Some(*b)
                            } else {
                                None
                            }
                        })
                        .collect(),
                },
                AttrType::StringList => {
                    return Err(type_error(e, "left side of `in` must be a scalar"))
                }
            };
            TypedExpr::Leaf(pred)
        }
        Expr::In {
            lhs,
            rhs: ListOperand::Attr(a),
        } => {
            let (list, rt) = resolve(a, schema)?;
            let lt = operand_type(lhs, schema)?;
            if rt != AttrType::StringList || lt != AttrType::String {
                return Err(type_error(
                    e,
                    format!("`in` needs a string and a string_list, found {lt} and {rt}"),
                ));
            }
            TypedExpr::Leaf(Pred::ListHas {
                list,
                needle: str_arg(lhs, schema),
            })
        }
        Expr::Contains { lhs, rhs } => {
            let (lt, rt) = (operand_type(lhs, schema)?, operand_type(rhs, schema)?);
            if rt != AttrType::String {
                return Err(type_error(
                    e,
                    format!("`contains` needs a string on the right, found {rt}"),
                ));
            }
            match lt {
                AttrType::String => TypedExpr::Leaf(Pred::Substr {
                    hay: str_arg(lhs, schema),
                    needle: str_arg(rhs, schema),
                }),
                AttrType::StringList => TypedExpr::Leaf(Pred::ListHas {
                    list: col(lhs, schema).expect("list operand is an attribute"),
                    needle: str_arg(rhs, schema),
                }),
                t => {
                    return Err(type_error(
                        e,
                        format!("`contains` needs a string or string_list, found {t}"),
                    ))
                }
            }
        }
    })
}
