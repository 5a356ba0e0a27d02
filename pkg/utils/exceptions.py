class SsFuseError(Exception):
    pass


class DimensionError(SsFuseError):
    pass


class ParameterError(SsFuseError):
    pass


class NumericError(SsFuseError):
    pass


class FormatError(SsFuseError):
    pass


class ConfigError(SsFuseError):
    pass


class UsageError(SsFuseError):
    pass


class VerificationFailed(SsFuseError):
    pass
