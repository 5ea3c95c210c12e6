"""Exception hierarchy shared by every stage of the pipeline."""


class CbiError(Exception):
    """Base class for all errors raised by cbiso."""


# coverage
class CoverageError(CbiError):
    pass


class NoFailingExecution(CoverageError):
    pass


class DuplicateExecutionId(CoverageError):
    pass


class EmptyCandidateSet(CoverageError):
    pass


class UnknownFile(CoverageError, KeyError):
    pass


class MalformedGcovLine(CoverageError):
    def __init__(self, lineno: int, line: str):
        self.lineno = lineno
        self.line = line
        super().__init__(f"line {lineno}: cannot parse gcov record {line!r}")


# summaries
class SummaryError(CbiError):
    pass


class EmptyDocument(SummaryError):
    pass


class SummaryEmpty(SummaryError):
    pass


class StoreCorrupt(SummaryError):
    def __init__(self, path, offset: int, reason: str):
        self.path = path
        self.offset = offset
        super().__init__(f"{path}: corrupt summary store at byte {offset}: {reason}")


# prompt
class MissingSection(CbiError):
    pass


# llm boundary
class LlmError(CbiError):
    pass


class AuthError(LlmError):
    pass


class LlmTimeoutError(LlmError, TimeoutError):
    pass


class RateLimited(LlmError):
    pass


class ProtocolError(LlmError):
    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)

    @property
    def transient(self) -> bool:
        return self.status is not None and 500 <= self.status < 600


# evaluation
class EmptyResults(CbiError):
    pass


class ManifestError(CbiError):
    def __init__(self, path, field: str, reason: str):
        self.path = path
        self.field = field
        super().__init__(f"{path}: {field}: {reason}")
