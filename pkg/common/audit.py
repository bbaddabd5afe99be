from typing import Any, Dict, Optional
from datetime import datetime, timezone
from loguru import logger

JsonDict = Dict[str, Any]


def audit_event(action: str, scenario_id: Optional[str] = None, details: Optional[JsonDict] = None,
                seed: Optional[int] = None) -> None:
    evt = {
        "action": action,
        "scenario_id": scenario_id,
        "seed": seed,
        "details": details or {},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    logger.bind(audit=True).info(f"AUDIT {evt}")
