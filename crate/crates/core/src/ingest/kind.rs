use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

macro_rules! node_kinds {
    ($($variant:ident),+ $(,)?) => {
        /// Closed taxonomy of graph node types. Names follow the JavaParser class
        /// names (abbreviated where the ablation tables abbreviate them), so drop
        /// lists can be written with the same spelling.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum NodeKind {
            $($variant),+
        }

        impl NodeKind {
            pub const ALL: &'static [NodeKind] = &[$(NodeKind::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(NodeKind::$variant => stringify!($variant)),+
                }
            }
        }

        impl FromStr for NodeKind {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $(stringify!($variant) => Ok(NodeKind::$variant),)+
                    // long JavaParser spellings accepted as aliases
                    "ClassOrInterfaceDeclaration" => Ok(NodeKind::ClassOrInterfaceDecl),
                    "ExplicitConstructorInvocationStmt" => Ok(NodeKind::ExplCtorInvocStmt),
                    "SingleMemberAnnotationExpr" => Ok(NodeKind::SingleMemAnnoExpr),
                    "LocalClassDeclarationStmt" => Ok(NodeKind::LocalClassDeclStmt),
                    other => Err(format!("unknown node kind '{other}'")),
                }
            }
        }
    };
}

node_kinds! {
    CompilationUnit,
    PackageDeclaration,
    ImportDeclaration,
    ClassOrInterfaceDecl,
    EnumDeclaration,
    EnumConstantDeclaration,
    AnnotationDeclaration,
    InitializerDeclaration,
    FieldDeclaration,
    VariableDeclarator,
    MethodDeclaration,
    ConstructorDeclaration,
    Parameter,
    TypeParameter,
    Modifier,
    MarkerAnnotationExpr,
    SingleMemAnnoExpr,
    NormalAnnotationExpr,
    MemberValuePair,
    // types
    PrimitiveType,
    VoidType,
    ClassOrInterfaceType,
    ArrayType,
    WildcardType,
    IntersectionType,
    VarType,
    // statements
    BlockStmt,
    ExpressionStmt,
    IfStmt,
    ForStmt,
    ForEachStmt,
    WhileStmt,
    DoStmt,
    TryStmt,
    CatchClause,
    ReturnStmt,
    ThrowStmt,
    SwitchStmt,
    SwitchEntry,
    BreakStmt,
    ContinueStmt,
    AssertStmt,
    LabeledStmt,
    SynchronizedStmt,
    LocalClassDeclStmt,
    ExplCtorInvocStmt,
    EmptyStmt,
    // expressions
    VariableDeclarationExpr,
    AssignExpr,
    BinaryExpr,
    UnaryExpr,
    ConditionalExpr,
    InstanceOfExpr,
    CastExpr,
    EnclosedExpr,
    MethodCallExpr,
    MethodReferenceExpr,
    ObjectCreationExpr,
    ArrayCreationExpr,
    ArrayCreationLevel,
    ArrayInitializerExpr,
    ArrayAccessExpr,
    FieldAccessExpr,
    NameExpr,
    ThisExpr,
    SuperExpr,
    ClassExpr,
    TypeExpr,
    LambdaExpr,
    NullLiteralExpr,
    IntegerLiteralExpr,
    LongLiteralExpr,
    DoubleLiteralExpr,
    CharLiteralExpr,
    StringLiteralExpr,
    BooleanLiteralExpr,
    // comments
    LineComment,
    BlockComment,
    JavadocComment,
    // synthesized name layer
    NameNode,
    Other,
}

impl NodeKind {
    pub fn count() -> usize {
        Self::ALL.len()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_statement(self) -> bool {
        use NodeKind::*;
        matches!(
            self,
            BlockStmt
                | ExpressionStmt
                | IfStmt
                | ForStmt
                | ForEachStmt
                | WhileStmt
                | DoStmt
                | TryStmt
                | CatchClause
                | ReturnStmt
                | ThrowStmt
                | SwitchStmt
                | BreakStmt
                | ContinueStmt
                | AssertStmt
                | LabeledStmt
                | SynchronizedStmt
                | LocalClassDeclStmt
                | ExplCtorInvocStmt
                | EmptyStmt
        )
    }

    /// Kinds on which a qualifier label may be recorded.
    pub fn may_carry_label(self) -> bool {
        matches!(
            self,
            NodeKind::VariableDeclarator | NodeKind::MethodDeclaration | NodeKind::Parameter
        )
    }

    pub fn is_annotation(self) -> bool {
        matches!(
            self,
            NodeKind::MarkerAnnotationExpr | NodeKind::SingleMemAnnoExpr | NodeKind::NormalAnnotationExpr
        )
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for NodeKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for NodeKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
