"""
Celery Application Configuration
Celery app instance for distributing grid points over workers with Redis
"""
from celery import Celery
from app.core.config import settings

# Create Celery instance
celery_app = Celery(
    "dp_federated",
    broker=settings.celery_broker_url,
    backend=settings.celery_result_backend
)

# Celery Configuration
celery_app.conf.update(
    # Run in-process unless workers are deployed
    task_always_eager=settings.CELERY_TASK_ALWAYS_EAGER,
    task_eager_propagates=False,

    # Task execution settings
    task_track_started=settings.CELERY_TASK_TRACK_STARTED,
    task_time_limit=settings.CELERY_TASK_TIME_LIMIT,
    task_soft_time_limit=settings.CELERY_TASK_SOFT_TIME_LIMIT,

    # Result backend settings
    result_expires=settings.CELERY_RESULT_EXPIRES,
    result_persistent=True,

    # Serialization
    task_serializer=settings.CELERY_TASK_SERIALIZER,
    result_serializer=settings.CELERY_RESULT_SERIALIZER,
    accept_content=settings.CELERY_ACCEPT_CONTENT,

    # Whole searches and single grid points go to separate queues
    task_routes={
        "app.tasks.experiment_tasks.run_grid_search": {"queue": "default"},
        "app.tasks.experiment_tasks.evaluate_grid_point": {"queue": "grid_points"},
    },

    # Default queue
    task_default_queue="default",

    # Training runs are long; take one task at a time
    worker_prefetch_multiplier=1,
    worker_max_tasks_per_child=100,

    # Enable task events for Flower monitoring
    worker_send_task_events=True,
    task_send_sent_event=True,

    # Late acknowledgement - task acked after completion
    task_acks_late=True,
    task_reject_on_worker_lost=True,
)

# Auto-discover tasks from tasks module
celery_app.autodiscover_tasks(['app.tasks'])

# Explicitly import tasks to ensure they are registered
from app.tasks import experiment_tasks  # noqa: E402,F401


# Useful for debugging
if __name__ == "__main__":
    celery_app.start()
