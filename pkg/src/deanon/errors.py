class ParameterError(ValueError):
    """Invalid model, strategy or experiment parameter."""


class ProtocolError(RuntimeError):
    """Query issued against a session in the wrong state."""
