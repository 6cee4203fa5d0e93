from pitchopt.cli import main

raise SystemExit(main())
