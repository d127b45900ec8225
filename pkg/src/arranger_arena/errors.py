"""Exception hierarchy shared by every module."""


class ArenaError(Exception):
    """Base class for all simulator errors."""


class EmptyBatch(ArenaError):
    pass


class IndexOutOfRange(ArenaError):
    pass


class Underfunded(ArenaError):
    def __init__(self, agent, needed, available):
        super().__init__(f"{agent} needs {needed} but holds {available}")
        self.agent = agent
        self.needed = needed
        self.available = available


class NotChallengeable(ArenaError):
    pass


class NotTimedOut(ArenaError):
    pass


class IllegalMove(ArenaError):
    pass


class ElementIsValid(ArenaError):
    pass


class PreconditionFailed(ArenaError):
    pass


class BadPreimage(ArenaError):
    pass


class ConfigError(ArenaError):
    pass
