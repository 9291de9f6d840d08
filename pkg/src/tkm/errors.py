"""Exception hierarchy shared across the toolkit."""


class TKMError(Exception):
    """Base class for all toolkit errors."""


class EmptyCorpus(TKMError):
    pass


class InvalidHyperparams(TKMError, ValueError):
    pass


class DistributionInvalid(TKMError, ValueError):
    pass


class DegenerateTopic(TKMError):
    """A topic's score normalizer is zero; the topic has to be pruned."""

    def __init__(self, topics):
        self.topics = list(topics)
        super().__init__(f"degenerate topics (zero normalizer): {self.topics}")


class TopicInactive(TKMError, KeyError):
    pass


class BetaZero(TKMError, ValueError):
    pass


class DimensionMismatch(TKMError, ValueError):
    pass


class UnseenWord(TKMError, KeyError):
    pass


class EmptyReference(TKMError):
    pass


class ModelFormatError(TKMError, ValueError):
    """Raised when a model, corpus cache or index file cannot be parsed."""
