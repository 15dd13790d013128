class CfucbError(Exception):
    pass


class ConfigError(CfucbError):
    pass


class InvalidDimensionError(CfucbError):
    pass


class ModelConfigError(CfucbError):
    pass


class OracleUnavailableError(CfucbError):
    pass


class EstimateUnavailableError(CfucbError):
    pass


class InvalidCoefficientsError(CfucbError):
    pass


class ContractViolation(CfucbError):
    pass


class LambertWDomainError(CfucbError):
    pass


class XTooSmallError(CfucbError):
    pass


class CheckerConfigError(CfucbError):
    pass
