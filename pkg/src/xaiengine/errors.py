"""Exception hierarchy shared across the package."""


class XAIError(Exception):
    """Base class for every error raised by xaiengine."""


class SchemaError(XAIError, ValueError):
    """Input data violates a schema or container invariant."""


class ModelError(XAIError):
    """A model could not be trained, loaded or evaluated."""


class ProtocolError(ModelError):
    """An external model child process broke the line protocol."""

    def __init__(self, message, request_id=None, diagnostics=""):
        self.request_id = request_id
        self.diagnostics = diagnostics
        text = message
        if request_id is not None:
            text = f"{message} (request id {request_id})"
        if diagnostics:
            text = f"{text}\n--- child stderr ---\n{diagnostics}"
        super().__init__(text)


class CapabilityError(XAIError):
    """The model lacks a capability an explainer requires."""


class UnknownExplainerError(XAIError, KeyError):
    def __init__(self, name, valid):
        self.name = name
        self.valid = list(valid)
        super().__init__(name)

    def __str__(self):
        return f"unknown explainer {self.name!r}; valid keys: {', '.join(self.valid)}"
