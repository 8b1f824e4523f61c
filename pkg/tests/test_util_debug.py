import threading

import Util_Config as config
from Util_Debug import DebugLog


def test_concurrent_messages_keep_buffers_aligned(monkeypatch):
    monkeypatch.setattr(config, "IN_DEBUG_MODE", True)
    DebugLog.initialize()
    monkeypatch.setattr(DebugLog.get_instance(), "echo", False)
    DebugLog.clear()

    def worker(k):
        for i in range(200):
            DebugLog.add_message(f"worker {k} message {i}")

    threads = [threading.Thread(target=worker, args=(k,)) for k in range(8)]
    for thread in threads:
        thread.start()
    for thread in threads:
        thread.join()

    assert len(DebugLog._messages) == DebugLog._max_messages
    assert len(DebugLog._message_timestamps) == len(DebugLog._messages)
    assert DebugLog._message_timestamps == sorted(DebugLog._message_timestamps)
    DebugLog.clear()


def test_messages_are_dropped_outside_debug_mode(monkeypatch):
    monkeypatch.setattr(config, "IN_DEBUG_MODE", False)
    DebugLog.clear()
    DebugLog.add_message("ignored")
    assert DebugLog.recent() == []
