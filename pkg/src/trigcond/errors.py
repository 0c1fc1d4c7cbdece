"""Exception hierarchy.

Errors split into two families so callers (the CLI in particular) can tell a
bad model/configuration apart from bad input data.
"""


class TrigcondError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(TrigcondError):
    """Invalid model structure, configuration or refinement declaration."""


class DataError(TrigcondError):
    """Input data does not satisfy the contract of the operation."""


# -- network structure ------------------------------------------------------

class CyclicGraph(ConfigError):
    pass


class UnknownNode(ConfigError):
    pass


class DuplicateNode(ConfigError):
    pass


class DuplicateEdge(ConfigError):
    pass


class NoSuchEdge(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


# -- queries against a learned model ---------------------------------------

class UnknownState(DataError):
    pass


class ParentConfigMismatch(DataError):
    pass


class UnseenConfig(DataError):
    """Parent configuration has no training support and the policy is strict."""


class IncompleteAssignment(DataError):
    pass


# -- datasets ---------------------------------------------------------------

class MalformedRow(DataError):
    def __init__(self, index, reason=""):
        self.index = index
        self.reason = reason
        msg = f"malformed row {index}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class UnknownStateLabel(DataError):
    pass


class MissingAttribute(DataError):
    pass


class EmptyDataset(DataError):
    pass


class UnknownScene(DataError):
    pass


class IncompleteAnnotation(DataError):
    pass


class EmptyTrainCorpus(DataError):
    pass


class MalformedReport(DataError):
    pass
