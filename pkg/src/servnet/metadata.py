"""Service metadata documents: generation, serialization, admin documents,
and the shared-identity mutation rules.

Every service carries an XML metadata document (root element
``Service_Meta``) describing its type, description, class name, handle,
archive URIs, constructors, public methods, nested children and permanent
link targets. Most of it is generated automatically from registration
information; an admin document can add descriptive fields, an access
configuration, autonomic manager names and an initial data payload.

Services sharing an identity (utility services) must expose byte-identical
public static metadata, and may not store dynamic public metadata of their
own — the one forbidden cell of the sixteen-way mutation matrix.
"""

from __future__ import annotations

import uuid as _uuid
from dataclasses import dataclass, field, replace
from enum import Enum
from xml.etree import ElementTree as ET

from .access import AccessConfig, AccessGroup, check_covers
from .errors import (
    InvalidAdminDoc,
    InvalidConfig,
    SchemaViolation,
    SharedMetadataMismatch,
    UncoveredMethod,
    UnknownService,
)
from .model import Handle, Network, ServiceId, ServiceNode
from .services import MethodDescriptor, MethodTable, build_method_table, constructor_tags

# -- XML fragments -------------------------------------------------------------

def inner_xml(el: ET.Element) -> str:
    """The serialized content of *el* (text and children, tags included)."""
    parts = [el.text or ""]
    parts.extend(ET.tostring(child, encoding="unicode") for child in el)
    return "".join(parts)


def canonical_fragment(fragment: str) -> str:
    """Normalize an XML fragment so equal content serializes identically."""
    if not fragment:
        return ""
    try:
        wrapped = ET.fromstring(f"<w>{fragment}</w>")
    except ET.ParseError as exc:
        raise SchemaViolation(f"not a well-formed XML fragment: {exc}")
    return inner_xml(wrapped)


def _set_fragment(el: ET.Element, fragment: str) -> None:
    if not fragment:
        return
    wrapped = ET.fromstring(f"<w>{fragment}</w>")
    el.text = wrapped.text
    el.extend(list(wrapped))


# -- document model ------------------------------------------------------------

@dataclass(frozen=True)
class ConstructorDescriptor:
    """Parameter type tags of one service constructor."""

    param_tags: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "param_tags", tuple(self.param_tags))


@dataclass(frozen=True)
class MetadataDoc:
    """One service metadata document (the ``Service_Meta`` XML form)."""

    service_type: str
    class_name: str
    handle: Handle
    description: str = ""
    other_meta: str = ""
    archive_uris: tuple[str, ...] = ()
    constructors: tuple[ConstructorDescriptor, ...] = ()
    methods: MethodTable = field(default_factory=MethodTable)
    child_meta: tuple["MetadataDoc", ...] = ()
    link_meta: tuple["MetadataDoc", ...] = ()
    uuid: str | None = None
    private_meta: str = ""  # parallel section, omitted from public serialization

    def __post_init__(self):
        object.__setattr__(self, "description", canonical_fragment(self.description))
        object.__setattr__(self, "other_meta", canonical_fragment(self.other_meta))
        object.__setattr__(self, "private_meta", canonical_fragment(self.private_meta))
        object.__setattr__(self, "archive_uris", tuple(self.archive_uris))
        object.__setattr__(self, "constructors", tuple(self.constructors))
        object.__setattr__(self, "child_meta", tuple(self.child_meta))
        object.__setattr__(self, "link_meta", tuple(self.link_meta))

    def public_projection(self) -> "MetadataDoc":
        return replace(self, private_meta="")


# -- codec ----------------------------------------------------------------------

def _handle_element(h: Handle) -> ET.Element:
    el = ET.Element("Handle")
    u = ET.SubElement(el, "U")
    u.text = h.base_uri
    for seg in h.path:
        s = ET.SubElement(el, "S")
        s.text = seg
    return el


def _methods_element(table: MethodTable) -> ET.Element:
    el = ET.Element("Methods")
    for entry in table.entries:
        m = ET.SubElement(el, "Method")
        name = ET.SubElement(m, "Name")
        name.text = entry.name
        for tag in entry.param_tags:
            p = ET.SubElement(m, "P")
            p.text = tag
        r = ET.SubElement(m, "R")
        r.text = entry.return_tag
        lvl = ET.SubElement(m, "Level")
        lvl.text = entry.access_group
    return el


def metadata_to_element(d: MetadataDoc) -> ET.Element:
    root = ET.Element("Service_Meta")
    if d.uuid is not None:
        root.set("uuid", d.uuid)
    st = ET.SubElement(root, "Service_Type")
    st.text = d.service_type
    desc = ET.SubElement(root, "Description")
    _set_fragment(desc, d.description)
    other = ET.SubElement(root, "Other_Meta")
    _set_fragment(other, d.other_meta)
    cn = ET.SubElement(root, "Class_Name")
    cn.text = d.class_name
    root.append(_handle_element(d.handle))
    for uri in d.archive_uris:
        jar = ET.SubElement(root, "Jar_File")
        jar.text = uri
    ctors = ET.SubElement(root, "Constructors")
    for ctor in d.constructors:
        c = ET.SubElement(ctors, "Constructor")
        for tag in ctor.param_tags:
            p = ET.SubElement(c, "P")
            p.text = tag
    root.append(_methods_element(d.methods))
    children = ET.SubElement(root, "Child_Service_Meta")
    children.extend(metadata_to_element(child) for child in d.child_meta)
    links = ET.SubElement(root, "Link_Service_Meta")
    links.extend(metadata_to_element(link) for link in d.link_meta)
    return root


def metadata_to_bytes(d: MetadataDoc) -> bytes:
    """Schema-valid XML for the public projection of *d*."""
    return ET.tostring(metadata_to_element(d), encoding="utf-8")


_DOC_ELEMENTS = (
    "Service_Type", "Description", "Other_Meta", "Class_Name", "Handle",
    "Jar_File", "Constructors", "Methods", "Child_Service_Meta",
    "Link_Service_Meta",
)


def _leaf_text(el: ET.Element) -> str:
    if len(el):
        raise SchemaViolation(f"<{el.tag}> must not contain elements")
    return el.text or ""


def _parse_handle(el: ET.Element) -> Handle:
    kids = list(el)
    if not kids or kids[0].tag != "U" or any(k.tag != "S" for k in kids[1:]):
        raise SchemaViolation("Handle must be one U element then S elements")
    try:
        return Handle(_leaf_text(kids[0]), tuple(_leaf_text(k) for k in kids[1:]))
    except Exception as exc:
        raise SchemaViolation(f"bad Handle content: {exc}")


def _parse_methods(el: ET.Element) -> MethodTable:
    entries = []
    for m in el:
        if m.tag != "Method":
            raise SchemaViolation(f"unknown element <{m.tag}> in Methods")
        kids = list(m)
        if not kids or kids[0].tag != "Name" or len(kids) < 3 \
                or kids[-2].tag != "R" or kids[-1].tag != "Level":
            raise SchemaViolation("Method must be Name, P*, R, Level")
        params = kids[1:-2]
        if any(p.tag != "P" for p in params):
            raise SchemaViolation("Method params must be P elements")
        entries.append(MethodDescriptor(
            _leaf_text(kids[0]),
            tuple(_leaf_text(p) for p in params),
            _leaf_text(kids[-2]),
            _leaf_text(kids[-1]),
        ))
    try:
        return MethodTable(tuple(entries))
    except ValueError as exc:
        raise SchemaViolation(str(exc))


def metadata_from_element(root: ET.Element) -> MetadataDoc:
    if root.tag != "Service_Meta":
        raise SchemaViolation(f"expected <Service_Meta>, got <{root.tag}>")
    unknown_attrs = set(root.attrib) - {"uuid"}
    if unknown_attrs:
        raise SchemaViolation(f"unknown attribute(s) {sorted(unknown_attrs)}")
    order = {tag: i for i, tag in enumerate(_DOC_ELEMENTS)}
    last = -1
    seen: dict[str, list[ET.Element]] = {tag: [] for tag in _DOC_ELEMENTS}
    for child in root:
        idx = order.get(child.tag)
        if idx is None:
            raise SchemaViolation(f"unknown element <{child.tag}> in Service_Meta")
        if idx < last or (idx == last and child.tag != "Jar_File"):
            raise SchemaViolation(f"element <{child.tag}> out of order or repeated")
        last = idx
        seen[child.tag].append(child)
    for tag in ("Service_Type", "Description", "Other_Meta", "Class_Name", "Handle"):
        if not seen[tag]:
            raise SchemaViolation(f"mandatory element <{tag}> missing")
    ctors = []
    if seen["Constructors"]:
        for c in seen["Constructors"][0]:
            if c.tag != "Constructor":
                raise SchemaViolation(f"unknown element <{c.tag}> in Constructors")
            if any(p.tag != "P" for p in c):
                raise SchemaViolation("Constructor params must be P elements")
            ctors.append(ConstructorDescriptor(tuple(_leaf_text(p) for p in c)))
    methods = _parse_methods(seen["Methods"][0]) if seen["Methods"] else MethodTable()
    children = tuple(
        metadata_from_element(sub)
        for sub in (seen["Child_Service_Meta"][0] if seen["Child_Service_Meta"] else ())
    )
    links = tuple(
        metadata_from_element(sub)
        for sub in (seen["Link_Service_Meta"][0] if seen["Link_Service_Meta"] else ())
    )
    return MetadataDoc(
        service_type=_leaf_text(seen["Service_Type"][0]),
        class_name=_leaf_text(seen["Class_Name"][0]),
        handle=_parse_handle(seen["Handle"][0]),
        description=inner_xml(seen["Description"][0]),
        other_meta=inner_xml(seen["Other_Meta"][0]),
        archive_uris=tuple(_leaf_text(j) for j in seen["Jar_File"]),
        constructors=tuple(ctors),
        methods=methods,
        child_meta=children,
        link_meta=links,
        uuid=root.attrib.get("uuid"),
    )


def metadata_from_bytes(data: bytes) -> MetadataDoc:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise SchemaViolation(f"malformed metadata XML: {exc}")
    return metadata_from_element(root)


def static_public_bytes(d: MetadataDoc) -> bytes:
    """Serialized public *static* portion: everything identity-independent.

    Handle, uuid, children and link targets vary per instance and are
    excluded; this is the byte string that must agree across all live
    instances of one shared identity.
    """
    trimmed = replace(
        d,
        handle=Handle("static://shared"),
        uuid=None,
        child_meta=(),
        link_meta=(),
        private_meta="",
    )
    return metadata_to_bytes(trimmed)


# -- generation ------------------------------------------------------------------

def _sid_fragment(sid: ServiceId) -> str:
    shared = "true" if sid.shared else "false"
    el = ET.Element("Sid", {"shared": shared})
    el.text = sid.id
    return ET.tostring(el, encoding="unicode")


def _description_fragment(node: ServiceNode) -> str:
    if node.admin_doc is not None and node.admin_doc.description is not None:
        return node.admin_doc.description
    text = ""
    if node.impl is not None:
        text = getattr(type(node.impl), "description", "") or ""
    el = ET.Element("Text")
    el.text = text
    return ET.tostring(el, encoding="unicode")


def generate_metadata(network: Network, s: Handle, *, deep: bool = True) -> MetadataDoc:
    """Build the metadata document for the service at *s* from live state.

    ``deep=False`` yields the shallow form used for link targets (no child
    or link recursion, so mutual links cannot loop).
    """
    node = network.resolve_handle(s)
    admin = node.admin_doc
    service_type = "node"
    class_name = "servnet.node.Node"
    if node.impl is not None:
        cls = type(node.impl)
        service_type = getattr(cls, "service_type", "service")
        class_name = f"{cls.__module__}.{cls.__qualname__}"
    if admin is not None and admin.service_type is not None:
        service_type = admin.service_type
    other = _sid_fragment(node.sid)
    if admin is not None and admin.extra_meta:
        other += admin.extra_meta
    private = admin.private_meta if admin is not None else ""
    constructors: tuple[ConstructorDescriptor, ...] = ()
    if node.impl is not None:
        constructors = (ConstructorDescriptor(constructor_tags(type(node.impl))),)
    methods = node.methods if node.methods is not None else MethodTable()
    child_meta: tuple[MetadataDoc, ...] = ()
    link_meta: tuple[MetadataDoc, ...] = ()
    if deep:
        child_meta = tuple(
            generate_metadata(network, s.child(name)) for name in node.children
        )
        link_meta = tuple(
            generate_metadata(network, target, deep=False)
            for target in sorted(node.permanent_links, key=lambda h: h.path)
        )
    if node.meta_uuid is None:
        node.meta_uuid = _uuid.uuid4().hex
    doc = MetadataDoc(
        service_type=service_type,
        class_name=class_name,
        handle=s,
        description=_description_fragment(node),
        other_meta=other,
        archive_uris=tuple(getattr(node.impl, "archive_uris", ()) or ()),
        constructors=constructors,
        methods=methods,
        child_meta=child_meta,
        link_meta=link_meta,
        uuid=node.meta_uuid,
        private_meta=private,
    )
    node.metadata = doc
    return doc


# -- shared-identity consistency ---------------------------------------------------

class SharedMetadataRegistry:
    """Registration-time check: same shared ID implies identical static metadata."""

    def __init__(self):
        self._by_id: dict[str, bytes] = {}

    def register(self, sid: ServiceId, doc: MetadataDoc) -> None:
        if not sid.shared:
            return
        blob = static_public_bytes(doc)
        known = self._by_id.get(sid.id)
        if known is None:
            self._by_id[sid.id] = blob
        elif known != blob:
            raise SharedMetadataMismatch(
                f"shared id {sid.id!r}: public static metadata differs from the "
                "registered instance"
            )


# -- mutation matrix -----------------------------------------------------------------

class Visibility(Enum):
    PUBLIC = "public"
    PRIVATE = "private"


class Volatility(Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class MutationTarget(Enum):
    THIS = "this"
    OTHER = "other"


@dataclass(frozen=True)
class MutationRequest:
    """One cell of the metadata-flexibility matrix."""

    sid: ServiceId
    visibility: Visibility
    volatility: Volatility
    target: MutationTarget


def check_mutation_allowed(req: MutationRequest) -> bool:
    """Metadata may be stored for every combination except dynamic public
    metadata held by a shared-identity service itself."""
    return not (
        req.sid.shared
        and req.volatility is Volatility.DYNAMIC
        and req.visibility is Visibility.PUBLIC
        and req.target is MutationTarget.THIS
    )


# -- admin documents ------------------------------------------------------------------

@dataclass(frozen=True)
class AdminDoc:
    """Operator-supplied initialization: descriptive fields, access levels,
    autonomic manager kinds, extra metadata and an initial data payload."""

    service_type: str | None = None
    description: str | None = None
    access: AccessConfig | None = None
    autonomic_managers: tuple[str, ...] = ()
    extra_meta: str = ""
    private_meta: str = ""
    initial_data: str = ""

    def __post_init__(self):
        object.__setattr__(self, "autonomic_managers", tuple(self.autonomic_managers))
        for name in ("description",):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, canonical_fragment(value))
        for name in ("extra_meta", "private_meta", "initial_data"):
            object.__setattr__(self, name, canonical_fragment(getattr(self, name)))


def admin_doc_to_bytes(doc: AdminDoc) -> bytes:
    root = ET.Element("Admin_Doc")
    if doc.service_type is not None:
        st = ET.SubElement(root, "Service_Type")
        st.text = doc.service_type
    if doc.description is not None:
        desc = ET.SubElement(root, "Description")
        _set_fragment(desc, doc.description)
    if doc.access is not None:
        acc = ET.SubElement(root, "Access")
        for g in doc.access.groups:
            gel = ET.SubElement(acc, "Group", {"id": g.group_id, "level": str(g.level)})
            ph = ET.SubElement(gel, "Password_Hash")
            ph.text = g.password_hash
            if g.excluded:
                ex = ET.SubElement(gel, "Excludes")
                for gid in sorted(g.excluded):
                    gx = ET.SubElement(ex, "G")
                    gx.text = gid
        for method in sorted(doc.access.method_group):
            ET.SubElement(acc, "Map", {
                "method": method, "group": doc.access.method_group[method],
            })
    if doc.autonomic_managers:
        auto = ET.SubElement(root, "Autonomic")
        for kind in doc.autonomic_managers:
            mgr = ET.SubElement(auto, "Manager")
            mgr.text = kind
    if doc.extra_meta:
        extra = ET.SubElement(root, "Extra_Meta")
        _set_fragment(extra, doc.extra_meta)
    if doc.private_meta:
        priv = ET.SubElement(root, "Private_Meta")
        _set_fragment(priv, doc.private_meta)
    if doc.initial_data:
        data = ET.SubElement(root, "Data")
        _set_fragment(data, doc.initial_data)
    return ET.tostring(root, encoding="utf-8")


def admin_doc_from_bytes(data: bytes) -> AdminDoc:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise InvalidAdminDoc(f"malformed admin document: {exc}")
    if root.tag != "Admin_Doc":
        raise InvalidAdminDoc(f"expected <Admin_Doc>, got <{root.tag}>")
    fields: dict = {}
    managers: list[str] = []
    for child in root:
        if child.tag == "Service_Type":
            fields["service_type"] = _leaf_text(child)
        elif child.tag == "Description":
            fields["description"] = inner_xml(child)
        elif child.tag == "Access":
            fields["access"] = _parse_access(child)
        elif child.tag == "Autonomic":
            managers.extend(_leaf_text(m) for m in child if m.tag == "Manager")
        elif child.tag == "Extra_Meta":
            fields["extra_meta"] = inner_xml(child)
        elif child.tag == "Private_Meta":
            fields["private_meta"] = inner_xml(child)
        elif child.tag == "Data":
            fields["initial_data"] = inner_xml(child)
        else:
            raise InvalidAdminDoc(f"unknown element <{child.tag}> in Admin_Doc")
    try:
        return AdminDoc(autonomic_managers=tuple(managers), **fields)
    except (InvalidConfig, SchemaViolation) as exc:
        raise InvalidAdminDoc(str(exc))


def _parse_access(el: ET.Element) -> AccessConfig:
    groups: list[AccessGroup] = []
    method_group: dict[str, str] = {}
    for child in el:
        if child.tag == "Group":
            gid = child.attrib.get("id")
            level = child.attrib.get("level")
            if gid is None or level is None:
                raise InvalidAdminDoc("Group needs id and level attributes")
            password_hash = ""
            excluded: set[str] = set()
            for part in child:
                if part.tag == "Password_Hash":
                    password_hash = _leaf_text(part)
                elif part.tag == "Excludes":
                    excluded.update(_leaf_text(g) for g in part if g.tag == "G")
                else:
                    raise InvalidAdminDoc(f"unknown element <{part.tag}> in Group")
            try:
                groups.append(AccessGroup(gid, int(level), password_hash,
                                          frozenset(excluded)))
            except ValueError as exc:
                raise InvalidAdminDoc(f"bad Group: {exc}")
        elif child.tag == "Map":
            method = child.attrib.get("method")
            gid = child.attrib.get("group")
            if method is None or gid is None:
                raise InvalidAdminDoc("Map needs method and group attributes")
            method_group[method] = gid
        else:
            raise InvalidAdminDoc(f"unknown element <{child.tag}> in Access")
    try:
        return AccessConfig(tuple(groups), method_group)
    except InvalidConfig as exc:
        raise InvalidAdminDoc(str(exc))


def apply_admin_doc(network: Network, s: Handle, doc: AdminDoc) -> None:
    """Install *doc* on the service at *s* and regenerate its metadata."""
    node = network.resolve_handle(s)
    if doc.access is not None:
        names = node.methods.names() if node.methods is not None else []
        try:
            doc.access.validate()
            check_covers(doc.access, names)
        except (InvalidConfig, UncoveredMethod) as exc:
            raise InvalidAdminDoc(str(exc))
    with network.lock:
        node.admin_doc = doc
        if doc.access is not None:
            node.access_config = doc.access
            if node.impl is not None:
                node.methods = build_method_table(node.impl, doc.access)
        if doc.initial_data:
            node.state_blob = doc.initial_data
        generate_metadata(network, s)


def resolve_registered(network: Network, s: Handle) -> ServiceNode:
    node = network.resolve_handle(s)
    if node is network.root:
        raise UnknownService("the network root is not a service")
    return node
