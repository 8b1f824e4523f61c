import threading
import time
import Util_Config as config
from typing import List, Optional


class DebugLog:
    """Static debug log for showing library messages across the toolkit."""

    _instance: Optional['DebugLog'] = None
    _messages: List[str] = []
    _max_messages: int = 50
    _message_lifetime: float = 60.0  # seconds
    _message_timestamps: List[float] = []
    _lock = threading.Lock()  # solver workers log concurrently

    @classmethod
    def initialize(cls, echo: bool = True) -> None:
        """Initialize the debug log if it hasn't been initialized yet."""
        with cls._lock:
            if cls._instance is None:
                cls._instance = cls(echo)

    @classmethod
    def get_instance(cls) -> 'DebugLog':
        if cls._instance is None:
            cls.initialize()
        return cls._instance

    def __init__(self, echo: bool = True) -> None:
        self.echo = echo
        self.prefix = "[DEBUG]"

    @classmethod
    def add_message(cls, message: str) -> None:
        """Add a debug message, echoing it to the console."""
        if not config.IN_DEBUG_MODE:
            return

        instance = cls.get_instance()

        with cls._lock:
            cls._messages.append(message)
            cls._message_timestamps.append(time.time())
            if instance.echo:
                print(f"{instance.prefix} {message}")

            while len(cls._messages) > cls._max_messages:
                cls._messages.pop(0)
                cls._message_timestamps.pop(0)

    @classmethod
    def update(cls) -> None:
        """Drop expired messages."""
        current_time = time.time()
        with cls._lock:
            while cls._messages and current_time - cls._message_timestamps[0] > cls._message_lifetime:
                cls._messages.pop(0)
                cls._message_timestamps.pop(0)

    @classmethod
    def recent(cls) -> List[str]:
        cls.update()
        with cls._lock:
            return list(cls._messages)

    @classmethod
    def clear(cls) -> None:
        with cls._lock:
            cls._messages.clear()
            cls._message_timestamps.clear()
