"""IRI constants for the ODRL core/common vocabulary subset and the
data-spaces profile extension."""

from __future__ import annotations

from .model import Iri, Operator

ODRL = "http://www.w3.org/ns/odrl/2/"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
DC11 = "http://purl.org/dc/elements/1.1/"
XSD = "http://www.w3.org/2001/XMLSchema#"
DSP = "http://www.w3id.org/dataspaces-policies/"

# The profile is published under several equivalent bases; DSP above is the
# canonical one used for serialization.
DSP_ALIASES = (
    "http://www.w3id.org/dataspaces-policies/",
    "https://www.w3id.org/dataspaces-policies/",
    "http://w3id.org/dataspaces-policies/",
    "https://w3id.org/dataspaces-policies/",
)

DSP_PROFILE = Iri(DSP)
ODRL_CORE_PROFILE = Iri(ODRL + "core")

RDF_TYPE = Iri(RDF + "type")
RDF_VALUE = Iri(RDF + "value")
DC11_TITLE = Iri(DC11 + "title")

# Classes
ODRL_POLICY = Iri(ODRL + "Policy")
ODRL_SET = Iri(ODRL + "Set")
ODRL_OFFER = Iri(ODRL + "Offer")
ODRL_AGREEMENT = Iri(ODRL + "Agreement")
ODRL_PERMISSION_CLASS = Iri(ODRL + "Permission")
ODRL_PROHIBITION_CLASS = Iri(ODRL + "Prohibition")
ODRL_DUTY_CLASS = Iri(ODRL + "Duty")
ODRL_OBLIGATION_CLASS = Iri(ODRL + "Obligation")
ODRL_ACTION_CLASS = Iri(ODRL + "Action")
ODRL_CONSTRAINT_CLASS = Iri(ODRL + "Constraint")
ODRL_ASSET_CLASS = Iri(ODRL + "Asset")
ODRL_LEFT_OPERAND_CLASS = Iri(ODRL + "LeftOperand")
ODRL_OPERATOR_CLASS = Iri(ODRL + "Operator")

# Properties
ODRL_PROFILE_PROP = Iri(ODRL + "profile")
ODRL_PERMISSION = Iri(ODRL + "permission")
ODRL_PROHIBITION = Iri(ODRL + "prohibition")
ODRL_OBLIGATION = Iri(ODRL + "obligation")
ODRL_DUTY = Iri(ODRL + "duty")
ODRL_TARGET = Iri(ODRL + "target")
ODRL_ASSIGNER = Iri(ODRL + "assigner")
ODRL_ASSIGNEE = Iri(ODRL + "assignee")
ODRL_ACTION = Iri(ODRL + "action")
ODRL_CONSTRAINT = Iri(ODRL + "constraint")
ODRL_REFINEMENT = Iri(ODRL + "refinement")
ODRL_LEFT_OPERAND = Iri(ODRL + "leftOperand")
ODRL_OPERATOR = Iri(ODRL + "operator")
ODRL_RIGHT_OPERAND = Iri(ODRL + "rightOperand")

# Actions
ODRL_USE = Iri(ODRL + "use")
ODRL_READ = Iri(ODRL + "read")
ODRL_DELETE = Iri(ODRL + "delete")
ODRL_ANONYMIZE = Iri(ODRL + "anonymize")
ODRL_AGGREGATE = Iri(ODRL + "aggregate")
ODRL_INFORM = Iri(ODRL + "inform")
ODRL_COMPENSATE = Iri(ODRL + "compensate")
ODRL_NEXT_POLICY = Iri(ODRL + "nextPolicy")
ODRL_DISTRIBUTE = Iri(ODRL + "distribute")
DSP_UPDATE = Iri(DSP + "update")
DSP_QUALITY_CONTROL = Iri(DSP + "qualityControl")
DSP_STORE = Iri(DSP + "store")
DSP_ENCRYPT = Iri(DSP + "encrypt")

# Left operands
ODRL_COUNT = Iri(ODRL + "count")
ODRL_UNIT_OF_COUNT = Iri(ODRL + "unitOfCount")
ODRL_DATETIME = Iri(ODRL + "dateTime")
ODRL_TIME_INTERVAL = Iri(ODRL + "timeInterval")
ODRL_SPATIAL = Iri(ODRL + "spatial")
ODRL_EVENT = Iri(ODRL + "event")
ODRL_PURPOSE = Iri(ODRL + "purpose")
ODRL_PAY_AMOUNT = Iri(ODRL + "payAmount")
ODRL_RECIPIENT = Iri(ODRL + "recipient")
DSP_CONFORMS_TO = Iri(DSP + "conformsTo")
DSP_CONCURRENT_CONNECTIONS = Iri(DSP + "concurrentConnections")
DSP_BANDWIDTH = Iri(DSP + "bandwidth")
DSP_PROCESSING_POWER = Iri(DSP + "processingPower")
DSP_ATTESTED_CLAIM = Iri(DSP + "attestedClaim")
DSP_STORAGE_REGION = Iri(DSP + "storageRegion")

# Right-operand marker for "before the governed action happens"
ODRL_POLICY_USAGE = Iri(ODRL + "policyUsage")

# Helper vocabulary used by loadable profile definition files
DSP_DATATYPE = Iri(DSP + "datatype")
DSP_DEFINED_BY = Iri(DSP + "definedBy")

OPERATOR_IRIS: dict[Iri, Operator] = {
    Iri(ODRL + op.value): op for op in Operator
}
OPERATOR_TO_IRI: dict[Operator, Iri] = {op: iri for iri, op in OPERATOR_IRIS.items()}

POLICY_CLASS_KINDS = {
    ODRL_POLICY: None,  # bare policy defaults to Set
    ODRL_SET: "Set",
    ODRL_OFFER: "Offer",
    ODRL_AGREEMENT: "Agreement",
}


def normalize_profile_iri(iri: Iri) -> Iri:
    """Collapse the known spelling variants of the data-spaces profile."""
    for alias in DSP_ALIASES:
        if iri.value.startswith(alias):
            return Iri(DSP + iri.value[len(alias):])
    return iri
