from cxverb.cli.main import main

main()
