"""Exception hierarchy shared across the package."""


class CampmapError(Exception):
    """Base class for all package errors."""


class ConfigError(CampmapError):
    """Invalid or unresolvable run configuration."""


# --- taxonomy ---

class TaxonomyError(CampmapError):
    pass


class MalformedRecord(TaxonomyError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(TaxonomyError):
    def __init__(self, node_id: str):
        super().__init__(f"duplicate taxonomy id: {node_id!r}")
        self.node_id = node_id


class EmptyTaxonomy(TaxonomyError):
    pass


# --- providers ---

class ProviderError(CampmapError):
    pass


class ProviderUnavailable(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class EmptyResponse(ProviderError):
    pass


class UnparseableResponse(ProviderError):
    def __init__(self, raw: str):
        super().__init__(f"unparseable model response: {raw!r}")
        self.raw = raw


# --- retrieval / evaluation ---

class DimensionMismatch(CampmapError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected dimension {expected}, got {got}")
        self.expected = expected
        self.got = got


class MissingEmbedding(CampmapError):
    def __init__(self, pt_id: str):
        super().__init__(f"no embedding for pt {pt_id!r}")
        self.pt_id = pt_id


class EmptyTruth(CampmapError):
    pass


# --- labeling ---

class UnsortedEvents(CampmapError):
    def __init__(self, user_id: str):
        super().__init__(f"events out of timestamp order for user {user_id!r}")
        self.user_id = user_id


class UnknownPt(CampmapError):
    def __init__(self, pt_id: str):
        super().__init__(f"unknown pt id {pt_id!r}")
        self.pt_id = pt_id


class UnknownCampaign(CampmapError):
    def __init__(self, campaign_id: str):
        super().__init__(f"no coverage for exposed campaign {campaign_id!r}")
        self.campaign_id = campaign_id
