"""App manifest: the developer-supplied XML declaring resources, purposes,
usage constraints and allowable circumstances of an app."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from xml.parsers import expat
from xml.sax.saxutils import escape, quoteattr

from .errors import DuplicateAppId, MalformedXml, MissingField, UnknownResource
from .findings import REJECT, Finding, sort_findings


class Category(str, enum.Enum):
    DRIVING = "driving"
    INFOTAINMENT = "infotainment"
    DIAGNOSTICS = "diagnostics"


class Direction(str, enum.Enum):
    SUBSCRIBE = "subscribe"
    CONTROL = "control"


RESOURCES = (
    "vehicle_report",
    "steering",
    "throttle",
    "brake",
    "gear",
    "engine",
    "traffic_signal",
    "lead_vehicle_report",
    "location",
    "network",
    "storage",
)
ACTUATORS = frozenset({"steering", "throttle", "brake", "gear", "engine"})
CONTROL_ONLY = frozenset({"network", "storage"})
CIRCUMSTANCES = ("highway", "urban", "test_facility", "clear_weather", "any")


@dataclass(frozen=True)
class ResourceRequest:
    resource: str
    direction: Direction
    purpose: str
    exclusive: bool = False


@dataclass(frozen=True)
class AppManifest:
    app_id: str
    app_purpose: str
    resources: tuple[ResourceRequest, ...] = ()
    allowable_circumstances: tuple[str, ...] = ()
    category: Category = Category.DRIVING

    def requests(self, resource: str, direction: Direction | None = None):
        return [
            r
            for r in self.resources
            if r.resource == resource and (direction is None or r.direction == direction)
        ]

    def declares(self, resource: str, direction: Direction) -> bool:
        return bool(self.requests(resource, direction))

    def controls(self) -> dict[str, ResourceRequest]:
        return {r.resource: r for r in self.resources if r.direction == Direction.CONTROL}


@dataclass(frozen=True)
class ConflictFinding:
    resource: str
    apps: tuple[str, str]
    kind: str  # exclusive_vs_any | exclusive_vs_exclusive


# ---------------------------------------------------------------- parsing


@dataclass
class _Node:
    tag: str
    attrib: dict
    line: int
    text: str = ""
    children: list = field(default_factory=list)


def _build_tree(xml_text: str | bytes) -> _Node:
    parser = expat.ParserCreate()
    stack: list[_Node] = []
    root: list[_Node] = []

    def start(tag, attrib):
        node = _Node(tag, dict(attrib), parser.CurrentLineNumber)
        if stack:
            stack[-1].children.append(node)
        else:
            root.append(node)
        stack.append(node)

    def end(tag):
        stack.pop()

    def chars(data):
        if stack:
            stack[-1].text += data

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        if isinstance(xml_text, str):
            xml_text = xml_text.encode("utf-8")
        parser.Parse(xml_text, True)
    except expat.ExpatError as exc:
        raise MalformedXml(f"line {exc.lineno}: {expat.ErrorString(exc.code)}") from exc
    return root[0]


def _closed(node: _Node, attrs: set[str], children: set[str]) -> None:
    for a in node.attrib:
        if a not in attrs:
            raise MalformedXml(f"line {node.line}: unexpected attribute {a!r} on <{node.tag}>")
    for c in node.children:
        if c.tag not in children:
            raise MalformedXml(f"line {c.line}: unexpected element <{c.tag}> in <{node.tag}>")
    if not children and node.children:
        raise MalformedXml(f"line {node.line}: <{node.tag}> takes no child elements")


def _attr(node: _Node, name: str) -> str:
    if name not in node.attrib:
        raise MissingField(f"{node.tag}@{name}", node.line)
    return node.attrib[name]


def _parse_bool(node: _Node, name: str, default: bool) -> bool:
    raw = node.attrib.get(name)
    if raw is None:
        return default
    if raw not in ("true", "false"):
        raise MalformedXml(f"line {node.line}: {name} must be 'true' or 'false', got {raw!r}")
    return raw == "true"


def _one(node: _Node, tag: str, required: bool = True) -> _Node | None:
    found = [c for c in node.children if c.tag == tag]
    if len(found) > 1:
        raise MalformedXml(f"line {found[1].line}: duplicate <{tag}> in <{node.tag}>")
    if not found:
        if required:
            raise MissingField(tag, node.line)
        return None
    return found[0]


def parse_manifest(xml_text: str | bytes) -> AppManifest:
    root = _build_tree(xml_text)
    if root.tag != "avapp":
        raise MalformedXml(f"line {root.line}: root element must be <avapp>, got <{root.tag}>")
    _closed(root, {"id", "category"}, {"purpose", "circumstances", "resource"})
    app_id = _attr(root, "id")
    try:
        category = Category(_attr(root, "category"))
    except ValueError:
        raise MalformedXml(f"line {root.line}: unknown category {root.attrib['category']!r}")

    purpose_node = _one(root, "purpose")
    _closed(purpose_node, set(), set())

    circumstances: list[str] = []
    circ = _one(root, "circumstances", required=False)
    if circ is not None:
        _closed(circ, set(), {"tag"})
        for tag in circ.children:
            _closed(tag, set(), set())
            value = tag.text.strip()
            if value not in CIRCUMSTANCES:
                raise MalformedXml(f"line {tag.line}: unknown circumstance tag {value!r}")
            circumstances.append(value)

    resources = []
    for node in root.children:
        if node.tag != "resource":
            continue
        _closed(node, {"name", "direction", "exclusive"}, {"purpose"})
        name = _attr(node, "name")
        if name not in RESOURCES:
            raise UnknownResource(name, node.line)
        try:
            direction = Direction(_attr(node, "direction"))
        except ValueError:
            raise MalformedXml(f"line {node.line}: unknown direction {node.attrib['direction']!r}")
        rp = _one(node, "purpose")
        _closed(rp, set(), set())
        resources.append(
            ResourceRequest(name, direction, rp.text.strip(), _parse_bool(node, "exclusive", False))
        )

    return AppManifest(
        app_id=app_id,
        app_purpose=purpose_node.text.strip(),
        resources=tuple(resources),
        allowable_circumstances=tuple(circumstances),
        category=category,
    )


def serialize_manifest(m: AppManifest) -> str:
    out = [f"<avapp id={quoteattr(m.app_id)} category={quoteattr(m.category.value)}>"]
    out.append(f"  <purpose>{escape(m.app_purpose)}</purpose>")
    out.append("  <circumstances>")
    out.extend(f"    <tag>{t}</tag>" for t in m.allowable_circumstances)
    out.append("  </circumstances>")
    for r in m.resources:
        ex = "true" if r.exclusive else "false"
        out.append(
            f"  <resource name={quoteattr(r.resource)} direction={quoteattr(r.direction.value)}"
            f" exclusive={quoteattr(ex)}>"
        )
        out.append(f"    <purpose>{escape(r.purpose)}</purpose>")
        out.append("  </resource>")
    out.append("</avapp>")
    return "\n".join(out) + "\n"


# ------------------------------------------------------------- validation


def validate_manifest(m: AppManifest) -> list[Finding]:
    findings = []
    if not m.app_id.strip():
        findings.append(Finding("id", "app_id_required", REJECT, "app id is empty"))
    if not m.app_purpose.strip():
        findings.append(Finding("purpose", "purpose_required", REJECT, "app purpose is empty"))

    tags = m.allowable_circumstances
    if m.category == Category.DRIVING and not tags:
        findings.append(
            Finding("circumstances", "circumstances_required", REJECT,
                    "driving apps must declare allowable circumstances")
        )
    if "any" in tags and len(set(tags)) > 1:
        findings.append(
            Finding("circumstances", "any_exclusive_tag", REJECT,
                    "'any' cannot be combined with other tags")
        )
    if len(set(tags)) != len(tags):
        findings.append(Finding("circumstances", "duplicate_tag", REJECT, "repeated circumstance tag"))

    seen = set()
    for i, r in enumerate(m.resources):
        where = f"resources[{i}]"
        key = (r.resource, r.direction)
        if key in seen:
            findings.append(
                Finding(where, "duplicate_resource", REJECT, f"{r.resource}/{r.direction.value} repeated")
            )
        seen.add(key)
        if not r.purpose.strip():
            findings.append(
                Finding(f"{where}.purpose", "purpose_required", REJECT, f"{r.resource} has no purpose")
            )
        if r.direction == Direction.CONTROL and r.resource not in ACTUATORS | CONTROL_ONLY:
            findings.append(
                Finding(f"{where}.direction", "invalid_direction", REJECT,
                        f"{r.resource} is not controllable")
            )
        if r.direction == Direction.SUBSCRIBE and r.resource in CONTROL_ONLY:
            findings.append(
                Finding(f"{where}.direction", "invalid_direction", REJECT,
                        f"{r.resource} only supports control")
            )
    return sort_findings(findings)


def detect_conflicts(installed: list[AppManifest], candidate: AppManifest) -> list[ConflictFinding]:
    if any(m.app_id == candidate.app_id for m in installed):
        raise DuplicateAppId(candidate.app_id)
    ours = candidate.controls()
    out = []
    for other in installed:
        theirs = other.controls()
        for resource in sorted(ours.keys() & theirs.keys()):
            a, b = theirs[resource], ours[resource]
            if not (a.exclusive or b.exclusive):
                continue
            kind = "exclusive_vs_exclusive" if a.exclusive and b.exclusive else "exclusive_vs_any"
            out.append(ConflictFinding(resource, (other.app_id, candidate.app_id), kind))
    return out
