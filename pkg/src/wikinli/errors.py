class WikiNLIError(Exception):
    pass


class ConfigError(WikiNLIError):
    """Bad experiment configuration or command-line arguments."""


class DataError(WikiNLIError):
    """Input data that violates a precondition (empty class, NaN feature, ...)."""


class StageError(DataError):
    def __init__(self, stage, cause):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
