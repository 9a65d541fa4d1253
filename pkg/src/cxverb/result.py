from abc import ABC


class ResultStatus():
    """
    Encapsulates status information for an operation that reports failures instead of raising, including a flag
    indicating success or failure and a corresponding message.
    """

    def __init__(self, is_error: bool, message: str = "") -> None:
        """
        :param is_error: Boolean flag indicating success or failure of the operation.
        :param message: Corresponding error message. Defaults to empty string when the operation succeeds.
        """
        self.is_error = is_error
        self.message = message


class ResultBase(ABC):
    """
    Abstract base class for returning information from long-running or checking operations.  Concrete subclasses
    carry the operation's details in addition to status information.
    """

    def __init__(self, is_error: bool, message: str) -> None:
        """
        :param is_error: Boolean flag indicating success or failure of the operation.
        :param message: Corresponding error message, empty on success.
        """
        self.result_status = ResultStatus(is_error, message)
