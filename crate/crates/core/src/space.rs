//! Layer catalog, legal transitions and the architecture descriptor that
//! crosses the evaluator boundary.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Closed set of layer kinds an architecture can be built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LayerKind {
    Input,
    Conv2D,
    Pooling,
    BatchNorm,
    Dropout,
    Flatten,
    Dense,
    Output,
}

impl LayerKind {
    pub const ALL: [LayerKind; 8] = [
        LayerKind::Input,
        LayerKind::Conv2D,
        LayerKind::Pooling,
        LayerKind::BatchNorm,
        LayerKind::Dropout,
        LayerKind::Flatten,
        LayerKind::Dense,
        LayerKind::Output,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Input => "Input",
            LayerKind::Conv2D => "Conv2D",
            LayerKind::Pooling => "Pooling",
            LayerKind::BatchNorm => "BatchNorm",
            LayerKind::Dropout => "Dropout",
            LayerKind::Flatten => "Flatten",
            LayerKind::Dense => "Dense",
            LayerKind::Output => "Output",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A discrete attribute option. Integers, reals and symbolic tokens are the
/// only shapes the catalog uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Int(i64),
    Real(f64),
    Token(String),
}

impl fmt::Display for AttrValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttrValue::Int(v) => write!(f, "{v}"),
            AttrValue::Real(v) => write!(f, "{v:?}"),
            AttrValue::Token(v) => f.write_str(v),
        }
    }
}

impl From<i64> for AttrValue {
    fn from(v: i64) -> Self {
        AttrValue::Int(v)
    }
}

impl From<f64> for AttrValue {
    fn from(v: f64) -> Self {
        AttrValue::Real(v)
    }
}

impl From<&str> for AttrValue {
    fn from(v: &str) -> Self {
        AttrValue::Token(v.to_string())
    }
}

/// One selectable attribute. Option order fixes pheromone-table indexing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub options: Vec<AttrValue>,
}

impl AttributeSpec {
    pub fn new(name: &str, options: Vec<AttrValue>) -> Self {
        Self {
            name: name.to_string(),
            options,
        }
    }

    pub fn position(&self, value: &AttrValue) -> Option<usize> {
        self.options.iter().position(|o| o == value)
    }
}

/// Catalog entry for one layer kind.
///
/// Successor sets depend on whether a `Flatten` has already occurred on the
/// path: `successors` applies before it, `successors_flattened` at or after it.
/// A kind that can never appear in a context has an empty list there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTemplate {
    pub kind: LayerKind,
    pub attributes: Vec<AttributeSpec>,
    pub successors: Vec<LayerKind>,
    pub successors_flattened: Vec<LayerKind>,
}

impl NodeTemplate {
    pub fn allowed_successors(&self, flattened: bool) -> &[LayerKind] {
        if flattened {
            &self.successors_flattened
        } else {
            &self.successors
        }
    }

    /// Layer built from the first option of every attribute.
    pub fn default_layer(&self) -> Layer {
        Layer {
            kind: self.kind,
            attributes: self
                .attributes
                .iter()
                .map(|a| (a.name.clone(), a.options[0].clone()))
                .collect(),
        }
    }

    /// Layer built from per-attribute option indices, in catalog order.
    pub fn layer_from_choices(&self, choices: &[usize]) -> Layer {
        debug_assert_eq!(choices.len(), self.attributes.len());
        Layer {
            kind: self.kind,
            attributes: self
                .attributes
                .iter()
                .zip(choices)
                .map(|(a, &i)| (a.name.clone(), a.options[i].clone()))
                .collect(),
        }
    }

    /// Number of distinct layers this template can produce.
    pub fn variant_count(&self) -> usize {
        self.attributes.iter().map(|a| a.options.len()).product()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("catalog has no template for {0}")]
    MissingTemplate(LayerKind),
    #[error("attribute {attribute} of {kind} has no options")]
    EmptyOptions { kind: LayerKind, attribute: String },
    #[error("attribute {attribute} of {kind} lists option {value} twice")]
    DuplicateOption {
        kind: LayerKind,
        attribute: String,
        value: String,
    },
    #[error("{0} has no successors but is not Output")]
    DeadEnd(LayerKind),
    #[error("Output is unreachable from {0}")]
    Unreachable(LayerKind),
}

/// Immutable catalog of layer templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    templates: Vec<NodeTemplate>,
}

const PRE_FLATTEN: [LayerKind; 5] = [
    LayerKind::Conv2D,
    LayerKind::Pooling,
    LayerKind::BatchNorm,
    LayerKind::Dropout,
    LayerKind::Flatten,
];

const POST_FLATTEN: [LayerKind; 3] = [LayerKind::Dense, LayerKind::Dropout, LayerKind::Output];

/// The built-in CNN catalog.
pub fn default_space() -> SearchSpace {
    use LayerKind::*;
    let ints = |v: &[i64]| v.iter().map(|&x| AttrValue::Int(x)).collect::<Vec<_>>();
    let template = |kind, attributes, pre: &[LayerKind], post: &[LayerKind]| NodeTemplate {
        kind,
        attributes,
        successors: pre.to_vec(),
        successors_flattened: post.to_vec(),
    };
    let templates = vec![
        template(Input, vec![], &PRE_FLATTEN, &[]),
        template(
            Conv2D,
            vec![
                AttributeSpec::new("filter_count", ints(&[16, 32, 64])),
                AttributeSpec::new("kernel_size", ints(&[1, 3, 5])),
            ],
            &PRE_FLATTEN,
            &[],
        ),
        template(
            Pooling,
            vec![
                AttributeSpec::new("pool_type", vec!["max".into(), "average".into()]),
                AttributeSpec::new("pool_size", ints(&[2])),
                AttributeSpec::new("stride", ints(&[2])),
            ],
            &PRE_FLATTEN,
            &[],
        ),
        template(BatchNorm, vec![], &PRE_FLATTEN, &[]),
        template(
            Dropout,
            vec![AttributeSpec::new(
                "rate",
                vec![0.1.into(), 0.3.into(), 0.5.into()],
            )],
            &PRE_FLATTEN,
            &POST_FLATTEN,
        ),
        template(Flatten, vec![], &[], &POST_FLATTEN),
        template(
            Dense,
            vec![AttributeSpec::new("output_size", ints(&[64, 128]))],
            &[],
            &POST_FLATTEN,
        ),
        template(Output, vec![], &[], &[]),
    ];
    SearchSpace::new(templates).expect("built-in catalog is well formed")
}

impl SearchSpace {
    /// Builds a space from one template per kind, checking option uniqueness
    /// and that Output is reachable from every kind.
    pub fn new(mut templates: Vec<NodeTemplate>) -> Result<Self, SpaceError> {
        templates.sort_by_key(|t| t.kind);
        for kind in LayerKind::ALL {
            if templates.get(kind.index()).map(|t| t.kind) != Some(kind) {
                return Err(SpaceError::MissingTemplate(kind));
            }
        }
        for t in &templates {
            for a in &t.attributes {
                if a.options.is_empty() {
                    return Err(SpaceError::EmptyOptions {
                        kind: t.kind,
                        attribute: a.name.clone(),
                    });
                }
                for (i, o) in a.options.iter().enumerate() {
                    if a.options[..i].contains(o) {
                        return Err(SpaceError::DuplicateOption {
                            kind: t.kind,
                            attribute: a.name.clone(),
                            value: o.to_string(),
                        });
                    }
                }
            }
            if t.kind != LayerKind::Output
                && t.successors.is_empty()
                && t.successors_flattened.is_empty()
            {
                return Err(SpaceError::DeadEnd(t.kind));
            }
        }
        let space = Self { templates };
        for kind in LayerKind::ALL {
            if kind != LayerKind::Output && space.steps_to_output(kind).is_none() {
                return Err(SpaceError::Unreachable(kind));
            }
        }
        Ok(space)
    }

    pub fn template(&self, kind: LayerKind) -> &NodeTemplate {
        &self.templates[kind.index()]
    }

    pub fn templates(&self) -> &[NodeTemplate] {
        &self.templates
    }

    pub fn successors(&self, kind: LayerKind, flattened: bool) -> &[LayerKind] {
        self.template(kind).allowed_successors(flattened)
    }

    /// Shortest number of transitions from `kind` to Output, over every
    /// flatten context the kind can appear in. `None` when unreachable.
    pub fn steps_to_output(&self, kind: LayerKind) -> Option<usize> {
        let contexts: &[bool] = match kind {
            LayerKind::Flatten | LayerKind::Dense => &[true],
            _ => &[false, true],
        };
        contexts
            .iter()
            .filter(|&&flat| !self.successors(kind, flat).is_empty() || kind == LayerKind::Output)
            .filter_map(|&flat| self.bfs_to_output(kind, flat))
            .max()
    }

    fn bfs_to_output(&self, start: LayerKind, flattened: bool) -> Option<usize> {
        let mut frontier = vec![(start, flattened)];
        let mut seen = vec![(start, flattened)];
        for steps in 0..=2 * LayerKind::ALL.len() {
            if frontier.iter().any(|(k, _)| *k == LayerKind::Output) {
                return Some(steps);
            }
            let mut next = Vec::new();
            for (k, flat) in frontier {
                for &s in self.successors(k, flat) {
                    let state = (s, flat || s == LayerKind::Flatten);
                    if !seen.contains(&state) {
                        seen.push(state);
                        next.push(state);
                    }
                }
            }
            frontier = next;
        }
        None
    }

    /// Kinds an ant may pick next; Output is implicit and never offered.
    pub fn selectable_successors(
        &self,
        kind: LayerKind,
        flattened: bool,
    ) -> impl Iterator<Item = LayerKind> + '_ {
        self.successors(kind, flattened)
            .iter()
            .copied()
            .filter(|k| *k != LayerKind::Output)
    }

    /// Samples a layer walk of `chosen` selectable layers with uniform choices
    /// at every step, then completes it.
    pub fn sample_walk<R: Rng + ?Sized>(
        &self,
        input_shape: [u32; 3],
        chosen: usize,
        rng: &mut R,
    ) -> ArchitectureDescriptor {
        let mut layers = vec![Layer::bare(LayerKind::Input)];
        let mut flattened = false;
        for _ in 0..chosen {
            let prev = layers.last().map(|l| l.kind).unwrap_or(LayerKind::Input);
            let options: Vec<LayerKind> = self.selectable_successors(prev, flattened).collect();
            if options.is_empty() {
                break;
            }
            let kind = options[rng.gen_range(0..options.len())];
            let template = self.template(kind);
            let choices: Vec<usize> = template
                .attributes
                .iter()
                .map(|a| rng.gen_range(0..a.options.len()))
                .collect();
            layers.push(template.layer_from_choices(&choices));
            flattened |= kind == LayerKind::Flatten;
        }
        complete_layers(&mut layers, self);
        ArchitectureDescriptor {
            input_shape,
            layers,
        }
    }
}

/// Appends the minimal legal suffix reaching Output: `Flatten` if the path
/// has not flattened yet, then `Output`. Appended layers take each
/// attribute's first option. Already-complete paths are left untouched.
pub fn complete_layers(layers: &mut Vec<Layer>, space: &SearchSpace) {
    if layers.last().map(|l| l.kind) == Some(LayerKind::Output) {
        return;
    }
    if !layers.iter().any(|l| l.kind == LayerKind::Flatten) {
        layers.push(space.template(LayerKind::Flatten).default_layer());
    }
    layers.push(space.template(LayerKind::Output).default_layer());
}

/// One concrete layer with its chosen attribute values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, AttrValue>,
}

impl Layer {
    pub fn bare(kind: LayerKind) -> Self {
        Self {
            kind,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<AttrValue>) -> Self {
        self.attributes.insert(name.to_string(), value.into());
        self
    }

    /// Canonical per-layer token, e.g. `Conv2D(filter_count=32,kernel_size=3)`.
    pub fn canonical(&self, input_shape: [u32; 3]) -> String {
        if self.kind == LayerKind::Input {
            let [h, w, c] = input_shape;
            return format!("Input({h},{w},{c})");
        }
        if self.attributes.is_empty() {
            return self.kind.name().to_string();
        }
        let attrs: Vec<String> = self
            .attributes
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}({})", self.kind, attrs.join(","))
    }
}

/// Separator between layer tokens in canonical strings.
pub const CANONICAL_SEPARATOR: &str = " -> ";

/// A concrete architecture: Input first, Output last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureDescriptor {
    pub input_shape: [u32; 3],
    pub layers: Vec<Layer>,
}

/// Which structural rule a descriptor broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    EmptyDescriptor,
    BadInputShape,
    InputNotFirst,
    DuplicateInput,
    OutputNotLast,
    MissingOutput,
    DuplicateFlatten,
    DenseBeforeFlatten,
    IllegalTransition,
    UnknownAttribute,
    MissingAttribute,
    IllegalValue,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid descriptor at layer {position}: {rule:?} ({detail})")]
pub struct ValidationError {
    pub position: usize,
    pub rule: Rule,
    pub detail: String,
}

impl ArchitectureDescriptor {
    pub fn new(input_shape: [u32; 3], layers: Vec<Layer>) -> Self {
        Self {
            input_shape,
            layers,
        }
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Checks positional rules, transitions and attributes, reporting the
    /// first violation in layer order.
    pub fn validate(&self, space: &SearchSpace) -> Result<(), ValidationError> {
        let fail = |position: usize, rule: Rule, detail: String| {
            Err(ValidationError {
                position,
                rule,
                detail,
            })
        };
        if self.input_shape.contains(&0) {
            return fail(0, Rule::BadInputShape, format!("{:?}", self.input_shape));
        }
        if self.layers.is_empty() {
            return fail(0, Rule::EmptyDescriptor, "no layers".into());
        }
        let last = self.layers.len() - 1;
        let mut flattened = false;
        for (pos, layer) in self.layers.iter().enumerate() {
            match layer.kind {
                LayerKind::Input if pos != 0 => {
                    return fail(pos, Rule::DuplicateInput, "Input repeated".into())
                }
                k if pos == 0 && k != LayerKind::Input => {
                    return fail(pos, Rule::InputNotFirst, format!("found {k}"))
                }
                LayerKind::Output if pos != last => {
                    return fail(pos, Rule::OutputNotLast, "Output before end".into())
                }
                LayerKind::Flatten if flattened => {
                    return fail(pos, Rule::DuplicateFlatten, "second Flatten".into())
                }
                LayerKind::Dense if !flattened => {
                    return fail(pos, Rule::DenseBeforeFlatten, "Dense needs Flatten".into())
                }
                _ => {}
            }
            if pos > 0 {
                let prev = self.layers[pos - 1].kind;
                if !space.successors(prev, flattened).contains(&layer.kind) {
                    return fail(
                        pos,
                        Rule::IllegalTransition,
                        format!("{prev} -> {}", layer.kind),
                    );
                }
            }
            check_attributes(pos, layer, space)?;
            flattened |= layer.kind == LayerKind::Flatten;
        }
        if self.layers[last].kind != LayerKind::Output {
            return fail(last, Rule::MissingOutput, "last layer is not Output".into());
        }
        Ok(())
    }

    /// Canonical text form. Injective over valid descriptors.
    pub fn canonical_string(&self, space: &SearchSpace) -> Result<String, ValidationError> {
        self.validate(space)?;
        Ok(self.prefix_key(self.layers.len()))
    }

    /// Canonical tokens of the first `len` layers, joined. Used as the
    /// weight-cache key for path prefixes; performs no validation.
    pub fn prefix_key(&self, len: usize) -> String {
        self.layer_tokens()
            .take(len)
            .collect::<Vec<_>>()
            .join(CANONICAL_SEPARATOR)
    }

    pub fn layer_tokens(&self) -> impl Iterator<Item = String> + '_ {
        self.layers.iter().map(|l| l.canonical(self.input_shape))
    }

    /// Number of layers between Input and Output.
    pub fn body_len(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| !matches!(l.kind, LayerKind::Input | LayerKind::Output))
            .count()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn check_attributes(pos: usize, layer: &Layer, space: &SearchSpace) -> Result<(), ValidationError> {
    let template = space.template(layer.kind);
    for name in layer.attributes.keys() {
        if !template.attributes.iter().any(|a| &a.name == name) {
            return Err(ValidationError {
                position: pos,
                rule: Rule::UnknownAttribute,
                detail: format!("{}.{name}", layer.kind),
            });
        }
    }
    for spec in &template.attributes {
        match layer.attributes.get(&spec.name) {
            None => {
                return Err(ValidationError {
                    position: pos,
                    rule: Rule::MissingAttribute,
                    detail: format!("{}.{}", layer.kind, spec.name),
                })
            }
            Some(v) if spec.position(v).is_none() => {
                return Err(ValidationError {
                    position: pos,
                    rule: Rule::IllegalValue,
                    detail: format!("{}.{}={v}", layer.kind, spec.name),
                })
            }
            Some(_) => {}
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use LayerKind::*;

    const SHAPE: [u32; 3] = [28, 28, 1];

    fn conv(filters: i64, kernel: i64) -> Layer {
        Layer::bare(Conv2D)
            .with("filter_count", filters)
            .with("kernel_size", kernel)
    }

    fn desc(layers: Vec<Layer>) -> ArchitectureDescriptor {
        ArchitectureDescriptor::new(SHAPE, layers)
    }

    #[test]
    fn catalog_reads_back() {
        let s = default_space();
        assert_eq!(
            s.successors(Input, false),
            &[Conv2D, Pooling, BatchNorm, Dropout, Flatten]
        );
        assert!(s.successors(Output, false).is_empty());
        assert!(s.successors(Output, true).is_empty());
        let filters = &s.template(Conv2D).attributes[0];
        assert_eq!(filters.name, "filter_count");
        assert_eq!(filters.options, vec![16.into(), 32.into(), 64.into()]);
        assert_eq!(s.successors(Dropout, true), &[Dense, Dropout, Output]);
    }

    #[test]
    fn output_reachable_within_three_steps() {
        let s = default_space();
        for kind in LayerKind::ALL {
            let steps = s.steps_to_output(kind).expect("reachable");
            assert!(steps <= 3, "{kind}: {steps}");
        }
    }

    #[test]
    fn rejects_unreachable_catalog() {
        let mut templates = default_space().templates().to_vec();
        templates[Flatten.index()].successors_flattened = vec![Dense];
        templates[Dense.index()].successors_flattened = vec![Dense];
        templates[Dropout.index()].successors_flattened = vec![Dense];
        assert!(matches!(
            SearchSpace::new(templates),
            Err(SpaceError::Unreachable(_))
        ));
    }

    #[test]
    fn validate_accepts_simple_cnn() {
        let d = desc(vec![
            Layer::bare(Input),
            conv(32, 3),
            Layer::bare(Flatten),
            Layer::bare(Dense).with("output_size", 64),
            Layer::bare(Output),
        ]);
        assert_eq!(d.validate(&default_space()), Ok(()));
    }

    #[test]
    fn validate_output_not_last() {
        let d = desc(vec![Layer::bare(Input), Layer::bare(Output), conv(32, 3)]);
        let err = d.validate(&default_space()).unwrap_err();
        assert_eq!((err.position, err.rule), (1, Rule::OutputNotLast));
    }

    #[test]
    fn validate_dense_without_flatten() {
        let d = desc(vec![
            Layer::bare(Input),
            Layer::bare(Dense).with("output_size", 64),
            Layer::bare(Output),
        ]);
        let err = d.validate(&default_space()).unwrap_err();
        assert_eq!((err.position, err.rule), (1, Rule::DenseBeforeFlatten));
    }

    #[test]
    fn validate_attribute_rules() {
        let s = default_space();
        let mut d = desc(vec![
            Layer::bare(Input),
            conv(48, 3),
            Layer::bare(Flatten),
            Layer::bare(Output),
        ]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::IllegalValue);
        d.layers[1] = Layer::bare(Conv2D).with("filter_count", 16);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::MissingAttribute);
        d.layers[1] = conv(16, 1).with("stride", 2);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::UnknownAttribute);
    }

    #[test]
    fn validate_transition_rules() {
        let s = default_space();
        let d = desc(vec![Layer::bare(Input), conv(16, 1), Layer::bare(Output)]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::IllegalTransition);
        let d = desc(vec![
            Layer::bare(Input),
            Layer::bare(Flatten),
            conv(16, 1),
            Layer::bare(Flatten),
            Layer::bare(Output),
        ]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::IllegalTransition);
        let d = desc(vec![
            Layer::bare(Input),
            Layer::bare(Flatten),
            Layer::bare(Flatten),
            Layer::bare(Output),
        ]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::DuplicateFlatten);
        let d = desc(vec![conv(16, 1), Layer::bare(Flatten), Layer::bare(Output)]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::InputNotFirst);
        let d = desc(vec![Layer::bare(Input), Layer::bare(Flatten)]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::MissingOutput);
    }

    #[test]
    fn post_flatten_dropout_may_not_convolve() {
        let s = default_space();
        let d = desc(vec![
            Layer::bare(Input),
            Layer::bare(Flatten),
            Layer::bare(Dropout).with("rate", 0.3),
            conv(16, 1),
            Layer::bare(Output),
        ]);
        assert_eq!(d.validate(&s).unwrap_err().rule, Rule::IllegalTransition);
    }

    #[test]
    fn canonical_base_case_and_shape() {
        let d = desc(vec![Layer::bare(Input)]);
        assert_eq!(d.prefix_key(1), "Input(28,28,1)");
        let d = desc(vec![
            Layer::bare(Input),
            Layer::bare(Dropout).with("rate", 0.5),
            Layer::bare(Flatten),
            Layer::bare(Output),
        ]);
        assert_eq!(
            d.canonical_string(&default_space()).unwrap(),
            "Input(28,28,1) -> Dropout(rate=0.5) -> Flatten -> Output"
        );
    }

    #[test]
    fn canonical_sorts_attribute_names() {
        let layer = Layer::bare(Pooling)
            .with("stride", 2)
            .with("pool_type", "max")
            .with("pool_size", 2);
        assert_eq!(
            layer.canonical(SHAPE),
            "Pooling(pool_size=2,pool_type=max,stride=2)"
        );
    }

    #[test]
    fn canonical_rejects_invalid() {
        let d = desc(vec![Layer::bare(Input), Layer::bare(Output), conv(32, 3)]);
        assert!(d.canonical_string(&default_space()).is_err());
    }

    #[test]
    fn completion_adds_minimal_suffix() {
        let s = default_space();
        let mut layers = vec![Layer::bare(Input), conv(32, 3)];
        complete_layers(&mut layers, &s);
        let kinds: Vec<_> = layers.iter().map(|l| l.kind).collect();
        assert_eq!(kinds, [Input, Conv2D, Flatten, Output]);

        let mut layers = vec![
            Layer::bare(Input),
            Layer::bare(Flatten),
            Layer::bare(Dense).with("output_size", 128),
        ];
        complete_layers(&mut layers, &s);
        let kinds: Vec<_> = layers.iter().map(|l| l.kind).collect();
        assert_eq!(kinds, [Input, Flatten, Dense, Output]);

        let before = layers.clone();
        complete_layers(&mut layers, &s);
        assert_eq!(layers, before);
    }

    #[test]
    fn json_schema_shape() {
        let text = r#"{"input_shape":[28,28,1],"layers":[{"kind":"Input"},{"kind":"Conv2D","attributes":{"filter_count":32,"kernel_size":3}},{"kind":"Flatten"},{"kind":"Output"}]}"#;
        let d = ArchitectureDescriptor::from_json(text).unwrap();
        assert_eq!(d.validate(&default_space()), Ok(()));
        assert_eq!(d.to_json(), text);
        let extra = r#"{"input_shape":[28,28,1],"layers":[],"name":"x"}"#;
        assert!(ArchitectureDescriptor::from_json(extra).is_err());
        let extra_layer = r#"{"input_shape":[28,28,1],"layers":[{"kind":"Input","id":3}]}"#;
        assert!(ArchitectureDescriptor::from_json(extra_layer).is_err());
    }

    #[test]
    fn real_options_survive_json() {
        let d = desc(vec![
            Layer::bare(Input),
            Layer::bare(Dropout).with("rate", 0.1),
            Layer::bare(Flatten),
            Layer::bare(Output),
        ]);
        let back = ArchitectureDescriptor::from_json(&d.to_json()).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.validate(&default_space()), Ok(()));
    }
}
